"""Structured text reports (YAML documents)."""

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from groundstate.config import settings
from groundstate.writers.csv_files import atomic_write_text

logger = logging.getLogger(__name__)


def _plain(value):
    """Convert numpy scalars / tuples into YAML-safe builtins."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def render_report(kind: str, body: dict, params: Optional[dict] = None, timestamp: bool = False) -> str:
    """YAML document with a small header block followed by the body."""
    document = {"report": kind, "schema_version": settings.SCHEMA_VERSION}
    if timestamp:
        document["written"] = datetime.now(timezone.utc).isoformat()
    if params is not None:
        document["problem"] = params
    document.update(body)
    return yaml.safe_dump(_plain(document), sort_keys=False, default_flow_style=False)


def write_report(path: Path, kind: str, body: dict, params: Optional[dict] = None) -> Path:
    atomic_write_text(path, render_report(kind, body, params))
    logger.info(f"Wrote {kind} report to {path}")
    return Path(path)
