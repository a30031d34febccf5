"""Pydantic models for problem data, solver settings and run configs."""

import logging
import math
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from groundstate.config import settings
from groundstate.errors import AdmissibilityError, ConfigError
from groundstate.radial import RadialGrid

logger = logging.getLogger(__name__)


class Params(BaseModel):
    """Data of the d-component system.

    -Delta u_i + lambda_i u_i = mu_i |u_i|^{2q-2} u_i + sum_{j != i} b_ij |u_j|^q |u_i|^{q-2} u_i
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n: int = Field(..., ge=1, description="Spatial dimension")
    q: float = Field(..., description="Exponent, 1 < q (< n/(n-2) when n >= 3)")
    lam: list[float] = Field(..., alias="lambda", min_length=1, description="Linear coefficients lambda_i")
    mu: list[float] = Field(..., min_length=1, description="Self-interaction strengths mu_i")
    b: list[list[float]] = Field(default_factory=list, description="Symmetric coupling matrix (diagonal unused)")

    @model_validator(mode="before")
    @classmethod
    def _expand_scalar_coupling(cls, data: Any) -> Any:
        """Allow `b: 0.3` as shorthand for equal off-diagonal couplings."""
        if not isinstance(data, dict):
            return data
        lam = data.get("lambda", data.get("lam"))
        coupling = data.get("b")
        if isinstance(lam, (list, tuple)):
            d = len(lam)
            if coupling is None and d == 1:
                data = {**data, "b": [[0.0]]}
            elif isinstance(coupling, (int, float)) and not isinstance(coupling, bool):
                matrix = [[0.0 if i == j else float(coupling) for j in range(d)] for i in range(d)]
                data = {**data, "b": matrix}
        return data

    @model_validator(mode="after")
    def _check_admissible(self) -> "Params":
        d = len(self.lam)
        if len(self.mu) != d:
            raise ValueError(f"mu has {len(self.mu)} entries, lambda has {d}")
        if len(self.b) != d or any(len(row) != d for row in self.b):
            raise ValueError(f"coupling matrix b must be {d}x{d}")
        for i, value in enumerate(self.lam):
            if not value > 0:
                raise ValueError(f"lambda_{i + 1} = {value} violates lambda_i > 0")
        for i, value in enumerate(self.mu):
            if not value > 0:
                raise ValueError(f"mu_{i + 1} = {value} violates mu_i > 0")
        for i in range(d):
            for j in range(i + 1, d):
                if self.b[i][j] != self.b[j][i]:
                    raise ValueError(f"b_{i + 1}{j + 1} != b_{j + 1}{i + 1}: coupling must be symmetric")
                if not self.b[i][j] > 0:
                    raise ValueError(f"b_{i + 1}{j + 1} = {self.b[i][j]} violates b_ij > 0")
        if not self.q > 1:
            raise ValueError(f"q = {self.q} violates growth condition 1 < q")
        if self.n >= 3 and not self.q < self.n / (self.n - 2):
            raise ValueError(
                f"q = {self.q} violates growth condition q < n/(n-2) = {self.n / (self.n - 2):.6g} for n = {self.n}"
            )
        return self

    @property
    def d(self) -> int:
        return len(self.lam)

    def coupling_matrix(self) -> np.ndarray:
        """b as an array with zeroed diagonal."""
        matrix = np.array(self.b, dtype=float)
        np.fill_diagonal(matrix, 0.0)
        return matrix

    def restrict(self, indices: Sequence[int]) -> "Params":
        """Subsystem on the given components, couplings b_ij with i, j in the subset."""
        idx = list(indices)
        if not idx:
            raise ValueError("cannot restrict to an empty set of components")
        if len(set(idx)) != len(idx) or any(i < 0 or i >= self.d for i in idx):
            raise ValueError(f"invalid component subset {idx} for d = {self.d}")
        return Params(
            n=self.n,
            q=self.q,
            lam=[self.lam[i] for i in idx],
            mu=[self.mu[i] for i in idx],
            b=[[self.b[i][j] if i != j else 0.0 for j in idx] for i in idx],
        )

    def permute(self, order: Sequence[int]) -> "Params":
        """Relabel components; component k of the result is component order[k]."""
        if sorted(order) != list(range(self.d)):
            raise ValueError(f"{list(order)} is not a permutation of 0..{self.d - 1}")
        return self.restrict(order)

    def with_coupling(self, b: float) -> "Params":
        """Same data with every off-diagonal coupling set to b."""
        return Params(n=self.n, q=self.q, lam=list(self.lam), mu=list(self.mu), b=b)

    def default_radius(self, factor: Optional[float] = None) -> float:
        factor = settings.DEFAULT_R_FACTOR if factor is None else factor
        return factor / math.sqrt(min(self.lam))


class GridConfig(BaseModel):
    """Truncated radial domain."""

    R: Optional[float] = Field(None, gt=0, description="Truncation radius (default R_factor/sqrt(min lambda))")
    M: int = Field(default_factory=lambda: settings.DEFAULT_CELLS, ge=8, description="Number of cells")
    R_factor: float = Field(default_factory=lambda: settings.DEFAULT_R_FACTOR, gt=0)

    def build(self, params: Params) -> RadialGrid:
        radius = self.R if self.R is not None else params.default_radius(self.R_factor)
        return RadialGrid(n=params.n, R=radius, M=self.M)


class SolverConfig(BaseModel):
    """Projected descent settings."""

    max_iter: int = Field(2000, ge=1)
    tol_residual: float = Field(1e-8, gt=0, description="Stop when the tangential residual L2 norm is below")
    step0: float = Field(1.0, gt=0, description="Initial Armijo step in the lambda-metric")
    armijo_factor: float = Field(0.5, gt=0, lt=1, description="Backtracking factor")
    armijo_c: float = Field(1e-4, gt=0, lt=1, description="Sufficient decrease constant")
    min_step: float = Field(1e-12, gt=0)
    symmetrize_every: int = Field(10, ge=0, description="Rearrange every k iterations (0 disables)")
    multistart: int = Field(4, ge=1, description="Number of Gaussian initializations")
    semitrivial_seeds: bool = Field(True, description="Also start from each single scalar ground state")
    seed_perturbation: float = Field(1e-8, ge=0, description="Amplitude of the null components in semitrivial seeds")
    amplitude_range: tuple[float, float] = Field((1e-2, 1e2), description="Log-uniform multistart amplitudes")
    tol_null_rel: float = Field(1e-6, gt=0, description="Component null iff |u_i|_2q < tol * max_j |u_j|_2q")
    seed: int = 0
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)

    @field_validator("amplitude_range")
    @classmethod
    def _check_range(cls, value: tuple[float, float]) -> tuple[float, float]:
        low, high = value
        if not 0 < low <= high:
            raise ValueError(f"amplitude_range must satisfy 0 < low <= high, got {value}")
        return value


class ThetaConfig(BaseModel):
    """Test-function construction: log-spaced theta grid and the added component."""

    theta_min: float = Field(1e-4, gt=0)
    theta_max: float = Field(10.0, gt=0)
    points: int = Field(61, ge=2)
    added: Optional[int] = Field(None, ge=0, description="0-based index of the added component (default: last)")

    @field_validator("theta_max")
    @classmethod
    def _check_order(cls, value: float, info: ValidationInfo) -> float:
        low = info.data.get("theta_min")
        if low is not None and not low < value:
            raise ValueError(f"theta_max must exceed theta_min, got {low} >= {value}")
        return value

    def grid(self) -> np.ndarray:
        return np.logspace(math.log10(self.theta_min), math.log10(self.theta_max), self.points)


class ThresholdConfig(BaseModel):
    """Coupling sweep and bisection for d = 2."""

    bracket: Optional[tuple[float, float]] = Field(None, description="[b_lo, b_hi] for bisection")
    width_tol: float = Field(1e-2, gt=0)
    sweep: bool = True
    b_min: float = Field(1e-3, gt=0)
    b_max: float = Field(10.0, gt=0)
    points: int = Field(13, ge=2)

    @field_validator("bracket")
    @classmethod
    def _check_bracket(cls, value: Optional[tuple[float, float]]) -> Optional[tuple[float, float]]:
        if value is not None and not 0 < value[0] < value[1]:
            raise ValueError(f"bracket must satisfy 0 < b_lo < b_hi, got {list(value)}")
        return value

    @field_validator("b_max")
    @classmethod
    def _check_sweep_range(cls, value: float, info: ValidationInfo) -> float:
        low = info.data.get("b_min")
        if low is not None and not low < value:
            raise ValueError(f"b_max must exceed b_min, got {low} >= {value}")
        return value

    def sweep_values(self) -> np.ndarray:
        return np.logspace(math.log10(self.b_min), math.log10(self.b_max), self.points)


class AuditConfig(BaseModel):
    """Randomized rearrangement suite and induction audit."""

    samples: int = Field(100, ge=1)
    sign_changing_every: int = Field(3, ge=0, description="Every k-th sample changes sign (0: never)")
    knots: int = Field(6, ge=1)
    tau_quad: float = Field(default_factory=lambda: settings.TAU_QUAD, gt=0)
    band: float = Field(default_factory=lambda: settings.PS_BAND, ge=0)
    induction: bool = True
    inject_fault: bool = Field(False, description="Scale rearranged fields to force violations")


class OutputConfig(BaseModel):
    dir: Path = Field(default_factory=lambda: settings.OUTPUT_DIR)
    prefix: str = ""
    write_fields: bool = True


class RunConfig(BaseModel):
    """Top-level run configuration (one YAML document)."""

    schema_version: int
    problem: Params
    grid: GridConfig = Field(default_factory=GridConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    theta: ThetaConfig = Field(default_factory=ThetaConfig)
    threshold: ThresholdConfig = Field(default_factory=ThresholdConfig)
    audit: AuditConfig = Field(default_factory=AuditConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("schema_version")
    @classmethod
    def _check_schema(cls, value: int) -> int:
        if value != settings.SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value} (expected {settings.SCHEMA_VERSION})")
        return value


# =============================================================================
# Loading
# =============================================================================


def _node_line(node: Optional[yaml.Node], loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the deepest YAML node reachable along loc."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = None
            for key_node, value_node in node.value:
                if key_node.value == str(key):
                    match = (key_node, value_node)
                    break
            if match is None:
                break
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply `a.b.c=value` overrides; values are parsed as YAML scalars or flow sequences."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value", key=item)
        path, text = item.split("=", 1)
        keys = [k for k in path.strip().split(".") if k]
        if not keys:
            raise ConfigError(f"override '{item}' has an empty key", key=item)
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"override '{item}' has an unparsable value: {e}", key=path)
        target = raw
        for key in keys[:-1]:
            nested = target.get(key)
            if nested is None:
                nested = {}
                target[key] = nested
            if not isinstance(nested, dict):
                raise ConfigError(f"override '{item}': '{key}' is not a mapping", key=path)
            target = nested
        target[keys[-1]] = value
    return raw


def parse_run_config(text: str, overrides: Sequence[str] = ()) -> RunConfig:
    """Parse a YAML run config, mapping validation errors to line-anchored ConfigErrors."""
    try:
        root = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"malformed YAML: {getattr(e, 'problem', e)}", line=line)

    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at the top level", line=1)

    raw = apply_overrides(raw, overrides)

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = [part for part in first["loc"]]
        key = ".".join(str(part) for part in loc)
        line = _node_line(root, loc)
        message = f"{key}: {first['msg']}" if key else first["msg"]
        error_cls = AdmissibilityError if loc[:1] == ["problem"] else ConfigError
        raise error_cls(message, line=line, key=key)


def load_run_config(path: Path, overrides: Sequence[str] = ()) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    config = parse_run_config(text, overrides)
    logger.info(f"Loaded run config {path} (d={config.problem.d}, n={config.problem.n}, q={config.problem.q})")
    return config
