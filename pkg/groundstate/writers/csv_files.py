"""CSV writers for field dumps, iteration traces, scans and audits."""

import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from groundstate.config import settings
from groundstate.energy import FieldVector
from groundstate.errors import GridMismatchError
from groundstate.radial import RadialGrid

logger = logging.getLogger(__name__)


def atomic_write_text(path: Path, text: str) -> Path:
    """Write text to path via a temp file in the same directory and os.replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def format_value(value) -> str:
    """Full-precision, diff-stable rendering of one CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return settings.FLOAT_FORMAT % float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return ";".join(format_value(v) for v in value)
    return str(value)


def write_rows_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    count = 0
    for row in rows:
        writer.writerow([format_value(v) for v in row])
        count += 1
    atomic_write_text(path, buffer.getvalue())
    logger.info(f"Wrote {count} rows to {path}")
    return Path(path)


def write_fields_csv(path: Path, fields: FieldVector) -> Path:
    """Field dump: header r,u1,...,ud and one row per node."""
    grid = fields.grid
    header = ["r"] + [f"u{i + 1}" for i in range(fields.d)]
    U = fields.as_array()
    rows = ([grid.r[k]] + [U[i, k] for i in range(fields.d)] for k in range(grid.size))
    return write_rows_csv(path, header, rows)


def read_fields_csv(path: Path, grid: RadialGrid) -> FieldVector:
    """Read a field dump written by write_fields_csv onto a matching grid."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if not header or header[0] != "r" or any(h != f"u{i}" for i, h in enumerate(header[1:], start=1)):
            raise ValueError(f"{path}: unexpected field dump header {header}")
        data = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
    if data.shape[0] != grid.size or not np.allclose(data[:, 0], grid.r, rtol=0.0, atol=1e-12 * grid.R):
        raise GridMismatchError(f"{path}: nodes do not match the grid (R={grid.R}, M={grid.M})")
    return FieldVector.from_array(grid, data[:, 1:].T)


def write_trace_csv(path: Path, trace: Sequence[tuple]) -> Path:
    return write_rows_csv(path, ["iteration", "level", "residual"], ((k, J, r) for k, (J, r) in enumerate(trace)))


def scan_rows(rows) -> List[list]:
    out = []
    for row in rows:
        masses = list(row.masses) + [0.0] * max(0, 2 - len(row.masses))
        out.append([row.b, row.level, row.classification, masses[0], masses[1], row.converged, row.residual])
    return out


SCAN_HEADER = ["b", "level", "classification", "mass1", "mass2", "converged", "residual"]
AUDIT_HEADER = ["sample", "kind", "components", "lhs", "rhs", "tolerance", "slack", "ok"]
THETA_HEADER = ["theta", "t", "C1", "C2", "lhs", "rhs", "energy_new", "energy_base", "tau_new", "passes", "undercuts", "chain_consistent"]
