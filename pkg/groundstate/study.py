"""Energy-comparison experiments: adding a component to a lower-dimensional ground state.

Given a ground state (u_1, ..., u_{d-1}) of a subsystem and a profile w for
the missing equation k, the test field

    (t u_1, ..., t u_{d-1}, t theta w)

is put on the Nehari manifold of the full system by

    t^{2q-2} (1 + mu_k theta^{2q} C2 + 2 sum_i b_ik theta^q D_i) = 1 + theta^2 C1

with S = sum_i ||u_i||^2_{lambda_i}, C1 = ||w||^2_{lambda_k}/S,
C2 = |w|_{2q}^{2q}/S and D_i = |u_i w|_q^q/S. Its energy undercuts the
subsystem level exactly when

    ((1 + theta^2 C1)^q - 1 - mu_k theta^{2q} C2) / theta^q  <  2 sum_i b_ik D_i

which holds for small theta when 1 < q < 2.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from groundstate.energy import FieldVector, evaluate, nehari_project
from groundstate.errors import (
    GroundStateError,
    InvalidBracketError,
    NotOnManifoldError,
    StudyInputError,
    SubsystemSolveError,
)
from groundstate.minimize import (
    SolveReport,
    run_multistart,
    merge_reports,
    proper_subsets,
    scalar_ground_state,
    solve,
    subsystem_solve,
)
from groundstate.models import Params, SolverConfig, ThetaConfig
from groundstate.radial import RadialField, RadialGrid, lp_power, mixed_term, norm_lambda_sq

logger = logging.getLogger(__name__)

# Base fields must satisfy |tau| <= MANIFOLD_TOL * quadratic
MANIFOLD_TOL = 1e-6

# Near-ties of the three equivalent comparisons are not counted as disagreement
CHAIN_TOL = 1e-8


def condition_lhs(theta: float, q: float, C1: float, C2: float, mu_k: float) -> float:
    """((1 + theta^2 C1)^q - 1 - mu_k theta^{2q} C2) / theta^q, cancellation-free for small theta."""
    if not theta > 0:
        raise StudyInputError(f"theta must be positive, got {theta}")
    growth = math.expm1(q * math.log1p(theta * theta * C1))
    return (growth - mu_k * theta ** (2.0 * q) * C2) / theta**q


def condition_rhs(b: Sequence[float], D: Sequence[float]) -> float:
    """2 sum_i b_ik D_i."""
    return 2.0 * float(np.dot(np.asarray(b, dtype=float), np.asarray(D, dtype=float)))


@dataclass
class TestConstruction:
    """Projected test field for one theta, with both sides of the comparison."""

    __test__ = False

    theta: float
    t: float
    C1: float
    C2: float
    D: List[float]
    lhs: float
    rhs: float
    energy_new: float
    energy_base: float
    tau_new: float
    quadratic_new: float
    ratio: float
    identity_residual: float
    added: int
    base_indices: tuple
    field: Optional[FieldVector] = None

    @property
    def passes(self) -> bool:
        return self.lhs < self.rhs

    @property
    def on_manifold(self) -> bool:
        return abs(self.tau_new) <= 1e-8 * self.quadratic_new

    @property
    def undercuts(self) -> bool:
        return self.energy_new < self.energy_base

    @property
    def chain_consistent(self) -> bool:
        """lhs < rhs, t^2 (1 + C1 theta^2) < 1 and energy_new < energy_base agree (up to near-ties)."""
        verdicts = {self.passes, self.ratio < 1.0, self.undercuts}
        if len(verdicts) == 1:
            return True
        near_tie = (
            abs(self.lhs - self.rhs) <= CHAIN_TOL * max(abs(self.lhs), abs(self.rhs), 1e-300)
            or abs(self.ratio - 1.0) <= CHAIN_TOL
            or abs(self.energy_new - self.energy_base) <= CHAIN_TOL * abs(self.energy_base)
        )
        return near_tie

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "t": self.t,
            "C1": self.C1,
            "C2": self.C2,
            "D": list(self.D),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "energy_new": self.energy_new,
            "energy_base": self.energy_base,
            "tau_new": self.tau_new,
            "on_manifold": self.on_manifold,
            "passes": self.passes,
            "undercuts": self.undercuts,
            "chain_consistent": self.chain_consistent,
            "added_component": self.added + 1,
        }


# =============================================================================
# Construction
# =============================================================================


def _added_component(p: Params, base: SolveReport, added: Optional[int]) -> int:
    indices = base.indices or tuple(range(base.minimizer.d))
    missing = [k for k in range(p.d) if k not in indices]
    if added is None:
        if len(missing) != 1:
            raise StudyInputError(f"base covers components {[i + 1 for i in indices]}; cannot infer the added one")
        return missing[0]
    if added not in missing:
        raise StudyInputError(f"component {added + 1} is already part of the base")
    return added


@dataclass
class _BaseData:
    indices: tuple
    fields: FieldVector
    S: float
    level: float


def _prepare_base(p: Params, base: SolveReport) -> _BaseData:
    indices = base.indices or tuple(range(base.minimizer.d))
    if not base.classification.is_nontrivial:
        raise StudyInputError(f"base must be nontrivial, got {base.classification.label()}")
    sub = p.restrict(indices)
    energy = evaluate(sub, base.minimizer)
    if abs(energy.tau) > MANIFOLD_TOL * energy.quadratic:
        raise NotOnManifoldError(
            f"base is not on the Nehari manifold: tau={energy.tau:.3e}, quadratic={energy.quadratic:.6g}"
        )
    _, fields = nehari_project(sub, base.minimizer)
    projected = evaluate(sub, fields)
    return _BaseData(indices=tuple(indices), fields=fields, S=projected.quadratic, level=projected.I)


def _construct(p: Params, data: _BaseData, w: RadialField, theta: float, k: int) -> TestConstruction:
    if w.is_zero():
        raise StudyInputError("test profile w must be nonzero")
    if not theta > 0:
        raise StudyInputError(f"theta must be positive, got {theta}")
    q = p.q
    S = data.S
    C1 = norm_lambda_sq(w, p.lam[k]) / S
    C2 = lp_power(w, 2.0 * q) / S
    D = [mixed_term(u, w, q) / S for u in data.fields.components]
    b_k = [p.b[i][k] for i in data.indices]

    numerator = 1.0 + theta * theta * C1
    denominator = 1.0 + p.mu[k] * theta ** (2.0 * q) * C2 + 2.0 * theta**q * float(np.dot(b_k, D))
    t = (numerator / denominator) ** (1.0 / (2.0 * q - 2.0))

    components: List[Optional[RadialField]] = [None] * p.d
    for i, u in zip(data.indices, data.fields.components):
        components[i] = u.scaled(t)
    components[k] = w.scaled(t * theta)
    covered = set(data.indices) | {k}
    for i in range(p.d):
        if i not in covered:
            components[i] = RadialField.zeros(w.grid)
    assembled = FieldVector(tuple(components))

    energy = evaluate(p, assembled)
    return TestConstruction(
        theta=theta,
        t=t,
        C1=C1,
        C2=C2,
        D=D,
        lhs=condition_lhs(theta, q, C1, C2, p.mu[k]),
        rhs=condition_rhs(b_k, D),
        energy_new=energy.I,
        energy_base=data.level,
        tau_new=energy.tau,
        quadratic_new=energy.quadratic,
        ratio=t * t * numerator,
        identity_residual=abs(t ** (2.0 * q - 2.0) * denominator - numerator) / numerator,
        added=k,
        base_indices=data.indices,
        field=assembled,
    )


def test_function_check(
    p: Params, base: SolveReport, w: RadialField, theta: float, added: Optional[int] = None
) -> TestConstruction:
    """Projected test field (t u_1, ..., t theta w) for one theta."""
    k = _added_component(p, base, added)
    construction = _construct(p, _prepare_base(p, base), w, theta, k)
    if not construction.on_manifold:
        logger.warning(f"Test field off the manifold: tau={construction.tau_new:.3e} at theta={theta:.3g}")
    return construction


test_function_check.__test__ = False


def theta_scan(
    p: Params,
    base: SolveReport,
    w: RadialField,
    theta_grid: Optional[Sequence[float]] = None,
    added: Optional[int] = None,
) -> List[TestConstruction]:
    """Construction at every theta of the grid (default 61 log-spaced points in [1e-4, 10])."""
    thetas = ThetaConfig().grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    k = _added_component(p, base, added)
    data = _prepare_base(p, base)
    return [_construct(p, data, w, float(theta), k) for theta in thetas]


def theta_search(
    p: Params,
    base: SolveReport,
    w: RadialField,
    theta_grid: Optional[Sequence[float]] = None,
    added: Optional[int] = None,
) -> Optional[TestConstruction]:
    """Passing construction of least energy, or None when no theta satisfies lhs < rhs."""
    passing = [c for c in theta_scan(p, base, w, theta_grid, added) if c.passes]
    if not passing:
        logger.info("No theta satisfies the energy-comparison condition")
        return None
    best = min(passing, key=lambda c: (c.energy_new, c.theta))
    logger.info(f"Best theta={best.theta:.4g}: energy_new={best.energy_new:.12g} < base {best.energy_base:.12g}")
    return best


# =============================================================================
# Induction audit
# =============================================================================


@dataclass
class InductionReport:
    subsystem_levels: Dict[tuple, float]
    base_indices: tuple
    omitted: int
    construction: Optional[TestConstruction]
    full: SolveReport
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def base_level(self) -> float:
        return self.subsystem_levels[self.base_indices]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    @property
    def margin(self) -> float:
        """min over subsystems of c_I - c_full."""
        return min(self.subsystem_levels.values()) - self.full.level

    def to_dict(self) -> dict:
        return {
            "subsystem_levels": {
                ",".join(str(i + 1) for i in subset): level for subset, level in self.subsystem_levels.items()
            },
            "base_components": [i + 1 for i in self.base_indices],
            "omitted_component": self.omitted + 1,
            "construction": self.construction.to_dict() if self.construction else None,
            "full_level": self.full.level,
            "full_classification": self.full.classification.label(),
            "margin": self.margin,
            "checks": dict(self.checks),
            "ok": self.ok,
        }


def induction_audit(
    p: Params,
    grid: RadialGrid,
    cfg: Optional[SolverConfig] = None,
    theta_grid: Optional[Sequence[float]] = None,
) -> InductionReport:
    """Energy drop from the best (d-1)-subsystem to the full system (1 < q < 2)."""
    cfg = cfg or SolverConfig()
    if not p.q < 2:
        raise StudyInputError(f"the induction audit needs 1 < q < 2, got q = {p.q}")
    if p.d < 2:
        raise StudyInputError("the induction audit needs d >= 2")

    subsystems: Dict[tuple, SolveReport] = {}
    for subset in proper_subsets(p.d, p.d - 1):
        try:
            subsystems[subset] = subsystem_solve(p, subset, grid, cfg)
        except GroundStateError as e:
            raise SubsystemSolveError(subset, e) from e
    levels = {subset: report.level for subset, report in subsystems.items()}
    base_indices = min(levels, key=lambda s: (levels[s], s))
    omitted = next(k for k in range(p.d) if k not in base_indices)
    logger.info(f"Subsystem levels: {levels}; base {base_indices}, adding component {omitted + 1}")

    try:
        w = scalar_ground_state(p, omitted, grid, cfg).minimizer.components[0]
    except GroundStateError as e:
        raise SubsystemSolveError((omitted,), e) from e

    base = subsystems[base_indices]
    construction = None
    if base.classification.is_nontrivial:
        construction = theta_search(p, base, w, theta_grid, added=omitted)
    else:
        label = base.classification.label()
        logger.warning(f"Best subsystem {list(base_indices)} is {label}; no construction from it")
    full = solve(p, grid, cfg)

    checks = {
        "subsystems_converged": all(r.converged for r in subsystems.values()),
        "base_nontrivial": base.classification.is_nontrivial,
        "theta_found": construction is not None,
        "energy_drop": construction is not None and construction.energy_new < levels[base_indices],
        "chain_consistent": construction is not None and construction.chain_consistent,
        "full_below_construction": construction is not None and full.level <= construction.energy_new,
        "full_converged": full.converged,
        "full_nontrivial": full.classification.is_nontrivial,
        "full_positive_at_origin": bool(np.all(full.minimizer.as_array()[:, 0] > 0)),
    }
    report = InductionReport(
        subsystem_levels=levels,
        base_indices=base_indices,
        omitted=omitted,
        construction=construction,
        full=full,
        checks=checks,
    )
    log = logger.info if report.ok else logger.warning
    log(f"Induction audit: full level {full.level:.12g}, margin {report.margin:.3e}, checks {checks}")
    return report


# =============================================================================
# Coupling scans (d = 2)
# =============================================================================


@dataclass
class ScanRow:
    b: float
    level: float
    classification: str
    masses: List[float]
    converged: bool
    residual: float

    @property
    def nontrivial(self) -> bool:
        return self.classification == "nontrivial"


@dataclass
class ThresholdReport:
    bracket: tuple
    rows: List[ScanRow]
    low_report: SolveReport
    high_report: SolveReport

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def to_dict(self) -> dict:
        return {
            "bracket": list(self.bracket),
            "width": self.width,
            "low": {"b": self.bracket[0], "classification": self.low_report.classification.label()},
            "high": {"b": self.bracket[1], "classification": self.high_report.classification.label()},
            "trace": [{"b": row.b, "classification": row.classification, "level": row.level} for row in self.rows],
        }


def _check_pair(template: Params) -> None:
    if template.d != 2:
        raise StudyInputError(f"coupling scans need d = 2, got d = {template.d}")


def _scan_row(b: float, report: SolveReport) -> ScanRow:
    return ScanRow(
        b=b,
        level=report.level,
        classification=report.classification.kind,
        masses=list(report.component_mass),
        converged=report.converged,
        residual=report.residual,
    )


def classification_sweep(
    template: Params,
    b_values: Sequence[float],
    grid: RadialGrid,
    cfg: Optional[SolverConfig] = None,
) -> List[ScanRow]:
    """Solve at every coupling value; rows come back in input order."""
    _check_pair(template)
    cfg = cfg or SolverConfig()
    inner_cfg = cfg.model_copy(update={"workers": 1})

    def run(b: float) -> ScanRow:
        return _scan_row(float(b), solve(template.with_coupling(float(b)), grid, inner_cfg))

    if cfg.workers > 1 and len(b_values) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(run, b_values))
    return [run(b) for b in b_values]


def threshold_scan(
    template: Params,
    grid: RadialGrid,
    cfg: Optional[SolverConfig],
    bracket: Sequence[float],
    width_tol: float = 1e-2,
) -> ThresholdReport:
    """Bisection on the classification of the ground state in the coupling b."""
    _check_pair(template)
    cfg = cfg or SolverConfig()
    low, high = float(bracket[0]), float(bracket[1])
    if not 0 < low < high:
        raise StudyInputError(f"bracket must satisfy 0 < b_lo < b_hi, got {bracket}")

    low_report = solve(template.with_coupling(low), grid, cfg)
    high_report = solve(template.with_coupling(high), grid, cfg)
    rows = [_scan_row(low, low_report), _scan_row(high, high_report)]
    if low_report.classification.is_nontrivial or not high_report.classification.is_nontrivial:
        raise InvalidBracketError(
            f"bracket [{low}, {high}] is invalid: classification {low_report.classification.label()} "
            f"at b_lo and {high_report.classification.label()} at b_hi",
            low_report=low_report,
            high_report=high_report,
        )

    while high - low > width_tol:
        mid = 0.5 * (low + high)
        report = solve(template.with_coupling(mid), grid, cfg)
        rows.append(_scan_row(mid, report))
        if report.classification.is_nontrivial:
            high, high_report = mid, report
        else:
            low, low_report = mid, report
        logger.info(f"Bisection: b={mid:.6g} -> {report.classification.label()}; bracket [{low:.6g}, {high:.6g}]")

    return ThresholdReport(bracket=(low, high), rows=rows, low_report=low_report, high_report=high_report)


@dataclass
class SemitrivialComparison:
    b: float
    semitrivial_level: float
    nontrivial_level: Optional[float]

    @property
    def nontrivial_wins(self) -> bool:
        return self.nontrivial_level is not None and self.nontrivial_level < self.semitrivial_level

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "semitrivial_level": self.semitrivial_level,
            "nontrivial_level": self.nontrivial_level,
            "nontrivial_wins": self.nontrivial_wins,
        }


def semitrivial_comparison(
    template: Params, b: float, grid: RadialGrid, cfg: Optional[SolverConfig] = None
) -> SemitrivialComparison:
    """min(c_1, c_2) against the lowest nontrivial run at coupling b."""
    _check_pair(template)
    cfg = cfg or SolverConfig()
    semitrivial = min(scalar_ground_state(template, i, grid, cfg).level for i in range(2))
    runs = run_multistart(template.with_coupling(b), grid, cfg)
    nontrivial = [r for r in runs if r.classification.is_nontrivial and r.converged]
    level = merge_reports(nontrivial).level if nontrivial else None
    return SemitrivialComparison(b=b, semitrivial_level=semitrivial, nontrivial_level=level)
