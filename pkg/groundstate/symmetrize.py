"""Discrete Schwarz rearrangement and the inequality audits built on it.

The rearrangement of a sampled profile is computed from the decreasing
distribution function of |u|: values sorted in decreasing order, each
carrying its node measure, are laid out from the origin outward, and every
grid cell receives the average of that decreasing profile over its own
measure interval. The result is nonnegative, nonincreasing, equimeasurable
with |u| up to one cell, monotone in u, and the identity on profiles that are
already nonnegative and nonincreasing.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from groundstate.config import settings
from groundstate.energy import FieldVector, _parts
from groundstate.models import Params
from groundstate.radial import RadialField, RadialGrid, gradient_sq, lp_power, mixed_term

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RearrangedField:
    field: RadialField
    monotone_certificate: bool


def _is_decreasing_profile(values: np.ndarray) -> bool:
    return bool(np.all(values >= 0.0) and np.all(np.diff(values) <= 0.0))


def rearrange(u: RadialField) -> RearrangedField:
    """Decreasing radial rearrangement u* of |u| on the same grid."""
    grid = u.grid
    values = u.values
    a = np.abs(values)
    if _is_decreasing_profile(a):
        profile = u if np.all(values >= 0.0) else u.abs()
        return RearrangedField(field=profile, monotone_certificate=True)

    order = np.argsort(-a, kind="stable")
    sorted_values = a[order]
    sorted_measure = np.cumsum(grid.weights[order])

    # F(m) = integral of the decreasing profile over [0, m]; piecewise linear
    knots = np.concatenate(([0.0], sorted_measure))
    integral = np.concatenate(([0.0], np.cumsum(sorted_values * grid.weights[order])))

    cell_edges = np.concatenate(([0.0], np.cumsum(grid.weights)))
    cell_integral = np.diff(np.interp(cell_edges, knots, integral))
    out = np.clip(cell_integral / grid.weights, 0.0, None)
    out = np.minimum.accumulate(out)
    out[-1] = 0.0

    rearranged = RadialField(grid, out)
    return RearrangedField(field=rearranged, monotone_certificate=_is_decreasing_profile(out))


def rearrange_vector(u: FieldVector, rearranger: Optional[Callable] = None) -> FieldVector:
    rearranger = rearranger or rearrange
    return FieldVector(tuple(rearranger(c).field for c in u.components))


def level_measure(u: RadialField, s: float) -> float:
    """Measure of {|u| > s} under the node quadrature."""
    return float(np.dot(u.grid.weights, np.abs(u.values) > s))


def quantization_bound(original: RadialField, rearranged: RadialField, p: float) -> float:
    """One-cell bound on | |u*|_p^p - |u|_p^p |.

    On cell j the decreasing profile lies between the neighbouring cell values,
    so each cell can be off by at most w_j (u*_{j-1}^p - u*_{j+1}^p).
    """
    grid = rearranged.grid
    top = float(np.max(np.abs(original.values))) if original.values.size else 0.0
    v = rearranged.values ** p
    upper = np.concatenate(([top**p], v[:-1]))
    lower = np.concatenate((v[1:], [0.0]))
    return float(np.dot(grid.weights, np.clip(upper - lower, 0.0, None)))


def abs_gradient_check(u: RadialField) -> tuple[float, float]:
    """(|grad |u||_2^2, |grad u|_2^2); the first never exceeds the second."""
    return gradient_sq(u.abs()), gradient_sq(u)


# =============================================================================
# Audit
# =============================================================================


@dataclass
class AuditRow:
    """One audited inequality; `ok` iff slack >= 0."""

    kind: str
    components: str
    lhs: float
    rhs: float
    tolerance: float
    slack: float
    ok: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "components": self.components,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "tolerance": self.tolerance,
            "slack": self.slack,
            "ok": self.ok,
        }


@dataclass
class InequalityAudit:
    rows: List[AuditRow] = field(default_factory=list)

    @property
    def violations(self) -> List[AuditRow]:
        return [row for row in self.rows if not row.ok]

    @property
    def ok(self) -> bool:
        return not self.violations

    def max_relative_violation(self, kind: str) -> float:
        """Largest (lhs - rhs)/|rhs| over rows of one kind, clipped at 0."""
        worst = 0.0
        for row in self.rows:
            if row.kind == kind and row.rhs != 0.0:
                worst = max(worst, (row.lhs - row.rhs) / abs(row.rhs))
        return worst


def _below(kind: str, label: str, lhs: float, rhs: float, tolerance: float) -> AuditRow:
    slack = float(rhs + tolerance - lhs)
    return AuditRow(kind, label, lhs, rhs, tolerance, slack, bool(slack >= 0.0))


def _equal(kind: str, label: str, lhs: float, rhs: float, tolerance: float) -> AuditRow:
    slack = float(tolerance - abs(lhs - rhs))
    return AuditRow(kind, label, lhs, rhs, tolerance, slack, bool(slack >= 0.0))


def audit_inequalities(
    u: FieldVector,
    params: Params,
    rearranger: Callable[[RadialField], RearrangedField] = rearrange,
    tau_quad: Optional[float] = None,
    band: Optional[float] = None,
) -> InequalityAudit:
    """Check the rearrangement inequalities on u.

    Rows per component: L^2 and L^{2q} preservation, Polya-Szego, and
    |grad |u|| <= |grad u| when the component changes sign. Rows per pair:
    Hardy-Littlewood on |u_i u_j|_q^q. One row compares tau(u*) with tau(u).
    Gradient and product rows use the band tau_quad + band*h; the tau row
    allows tau_quad times quadratic + self + coupling of u.
    """
    tau_quad = settings.TAU_QUAD if tau_quad is None else tau_quad
    band = settings.PS_BAND if band is None else band
    grid: RadialGrid = u.grid
    relative_band = tau_quad + band * grid.h
    q = params.q

    starred = [rearranger(c).field for c in u.components]
    rows: List[AuditRow] = []

    for i, (c, s) in enumerate(zip(u.components, starred)):
        label = str(i + 1)
        for p in (2.0, 2.0 * q):
            lhs = lp_power(s, p)
            rhs = lp_power(c, p)
            tolerance = tau_quad * rhs + quantization_bound(c, s, p)
            rows.append(_equal(f"lp_{p:g}", label, lhs, rhs, tolerance))

        ps_rhs = gradient_sq(c.abs())
        rows.append(_below("polya_szego", label, gradient_sq(s), ps_rhs, relative_band * ps_rhs))

        if np.any(c.values > 0) and np.any(c.values < 0):
            abs_lhs, abs_rhs = abs_gradient_check(c)
            rows.append(_below("abs_gradient", label, abs_lhs, abs_rhs, tau_quad * abs_rhs))

    for i in range(u.d):
        for j in range(i + 1, u.d):
            lhs = mixed_term(u.components[i], u.components[j], q)
            rhs = mixed_term(starred[i], starred[j], q)
            rows.append(_below("hardy_littlewood", f"{i + 1},{j + 1}", lhs, rhs, relative_band * rhs))

    quadratic, self_part, coupling = _parts(params, grid, u.as_array())
    quadratic_s, self_s, coupling_s = _parts(params, grid, np.vstack([s.values for s in starred]))
    tau_u = quadratic - self_part - coupling
    tau_s = quadratic_s - self_s - coupling_s
    scale = quadratic + self_part + coupling
    rows.append(_below("tau", "all", tau_s, tau_u, tau_quad * scale))

    audit = InequalityAudit(rows=rows)
    if not audit.ok:
        for row in audit.violations:
            logger.warning(f"Audit violation: {row.kind}[{row.components}] lhs={row.lhs:.6g} rhs={row.rhs:.6g}")
    return audit


# =============================================================================
# Random fields for the audit suite
# =============================================================================


def random_profile(
    rng: np.random.Generator, R: float, knots: int = 6, sign_changing: bool = False
) -> Callable[[np.ndarray], np.ndarray]:
    """Random continuous piecewise-linear profile on [0, R] vanishing at R."""
    positions = np.sort(rng.uniform(0.0, R, size=knots))
    low = -1.0 if sign_changing else 0.0
    values = rng.uniform(low, 1.0, size=knots)
    if sign_changing and not (np.any(values > 0) and np.any(values < 0)):
        values[0] = abs(values[0]) + 0.1
        values[-1] = -abs(values[-1]) - 0.1
    xs = np.concatenate(([0.0], positions, [R]))
    ys = np.concatenate(([rng.uniform(low, 1.0)], values, [0.0]))

    def profile(r: np.ndarray) -> np.ndarray:
        return np.interp(r, xs, ys)

    return profile


def random_piecewise_linear(
    grid: RadialGrid, d: int, rng: np.random.Generator, sign_changing: bool = False, knots: int = 6
) -> FieldVector:
    """Field vector of d random piecewise-linear profiles sampled on grid."""
    return FieldVector(
        tuple(
            RadialField.from_function(grid, random_profile(rng, grid.R, knots, sign_changing))
            for _ in range(d)
        )
    )


def scaled_rearranger(factor: float) -> Callable[[RadialField], RearrangedField]:
    """A deliberately broken rearrangement (output scaled by factor) for fault injection."""

    def broken(u: RadialField) -> RearrangedField:
        result = rearrange(u)
        return RearrangedField(field=result.field.scaled(factor), monotone_certificate=result.monotone_certificate)

    return broken
