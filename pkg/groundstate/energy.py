"""Energy functional, Nehari functional, gradient and Nehari projection.

For u = (u_1, ..., u_d):

    quadratic = sum_i ||u_i||^2_{lambda_i}
    self      = sum_i mu_i |u_i|_{2q}^{2q}
    coupling  = 2 sum_{i<j} b_ij |u_i u_j|_q^q
    I   = quadratic/2 - (self + coupling)/(2q)
    tau = quadratic - (self + coupling)

The array helpers (prefixed `_`) take the (d, M+1) sample matrix directly and
are what the solver calls in its inner loop.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from groundstate.errors import DimensionMismatchError, GridMismatchError, ProjectionUndefinedError
from groundstate.models import Params
from groundstate.radial import RadialField, RadialGrid, stiffness_apply

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FieldVector:
    """d radial profiles on one shared grid."""

    components: tuple

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise ValueError("a field vector needs at least one component")
        grid = components[0].grid
        for c in components[1:]:
            if not grid.matches(c.grid):
                raise GridMismatchError("all components of a field vector must share one grid")
        object.__setattr__(self, "components", components)

    @classmethod
    def from_array(cls, grid: RadialGrid, values: np.ndarray) -> "FieldVector":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        return cls(tuple(RadialField.from_values(grid, row) for row in values))

    @property
    def grid(self) -> RadialGrid:
        return self.components[0].grid

    @property
    def d(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        """(d, M+1) copy of the samples."""
        return np.vstack([c.values for c in self.components])

    def scaled(self, t: float) -> "FieldVector":
        return FieldVector(tuple(c.scaled(t) for c in self.components))

    def abs(self) -> "FieldVector":
        return FieldVector(tuple(c.abs() for c in self.components))

    def subset(self, indices: Sequence[int]) -> "FieldVector":
        return FieldVector(tuple(self.components[i] for i in indices))

    def permute(self, order: Sequence[int]) -> "FieldVector":
        return self.subset(order)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)


@dataclass
class EnergyBreakdown:
    """Parts of I and tau. `self_interaction` is the sum_i mu_i |u_i|_{2q}^{2q} part."""

    quadratic: float
    self_interaction: float
    coupling: float
    I: float
    tau: float

    @property
    def nonlinear(self) -> float:
        return self.self_interaction + self.coupling

    def to_dict(self) -> dict:
        return {
            "quadratic": self.quadratic,
            "self": self.self_interaction,
            "coupling": self.coupling,
            "I": self.I,
            "tau": self.tau,
        }


@dataclass
class Classification:
    """Nontriviality of a field vector; null components are 0-based indices."""

    kind: str
    null_components: List[int] = field(default_factory=list)
    masses: List[float] = field(default_factory=list)

    @property
    def is_nontrivial(self) -> bool:
        return self.kind == "nontrivial"

    def label(self) -> str:
        if self.kind == "semitrivial":
            return "semitrivial(" + ",".join(str(i + 1) for i in self.null_components) + ")"
        return self.kind

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "null_components": [i + 1 for i in self.null_components],
            "masses": list(self.masses),
        }


# =============================================================================
# Array-level core
# =============================================================================


def _parts(p: Params, grid: RadialGrid, U: np.ndarray) -> tuple[float, float, float]:
    """(quadratic, self, coupling) of the sample matrix U."""
    w = grid.weights
    slopes = np.diff(U, axis=1) / grid.h
    grad = (slopes * slopes) @ grid.face_weights
    mass = (U * U) @ w
    quadratic = float(np.sum(grad + np.asarray(p.lam) * mass))

    A = np.abs(U) ** p.q
    self_part = float(np.dot(np.asarray(p.mu), (A * A) @ w))

    coupling = 0.0
    b = p.coupling_matrix()
    for i in range(p.d):
        for j in range(i + 1, p.d):
            coupling += 2.0 * float(b[i, j]) * float(np.dot(w, A[i] * A[j]))
    return quadratic, self_part, coupling


def _weighted_gradient(p: Params, grid: RadialGrid, U: np.ndarray) -> np.ndarray:
    """W * gradient: the Euclidean gradient of I with respect to the node values.

    The boundary column is zero.
    """
    q = p.q
    w = grid.weights
    A = np.abs(U)
    Aq = A**q
    odd = np.sign(U) * A ** (q - 1.0)
    b = p.coupling_matrix()

    G = np.empty_like(U)
    for i in range(p.d):
        field_term = p.mu[i] * Aq[i] + b[i] @ Aq
        G[i] = stiffness_apply(grid, U[i]) + w * (p.lam[i] * U[i] - field_term * odd[i])
    G[:, -1] = 0.0
    return G


def _level(p: Params, grid: RadialGrid, U: np.ndarray) -> float:
    """I of the Nehari projection of U; inf when the projection is undefined.

    Evaluated in log space: for q close to 1 the exponents q/(q-1) and
    1/(q-1) are large and the direct powers overflow.
    """
    quadratic, self_part, coupling = _parts(p, grid, U)
    nonlinear = self_part + coupling
    if not nonlinear > 0 or not quadratic > 0:
        return math.inf
    q = p.q
    log_value = (q * math.log(quadratic) - math.log(nonlinear)) / (q - 1.0)
    try:
        return (0.5 - 0.5 / q) * math.exp(log_value)
    except OverflowError:
        return math.inf


def _projection_scalar(p: Params, quadratic: float, nonlinear: float) -> float:
    if not nonlinear > 0 or not quadratic > 0:
        raise ProjectionUndefinedError(
            f"Nehari projection undefined (quadratic={quadratic:.6g}, nonlinear={nonlinear:.6g})"
        )
    if quadratic == nonlinear:
        return 1.0
    try:
        t = math.exp((math.log(quadratic) - math.log(nonlinear)) / (2.0 * p.q - 2.0))
    except OverflowError:
        t = math.inf
    if not 0.0 < t < math.inf:
        raise ProjectionUndefinedError(
            f"Nehari projection scalar out of range (quadratic={quadratic:.6g}, nonlinear={nonlinear:.6g})"
        )
    return t


def _check_dimension(p: Params, u: FieldVector) -> None:
    if u.d != p.d:
        raise DimensionMismatchError(f"field has {u.d} components, parameters describe d = {p.d}")


# =============================================================================
# Public API
# =============================================================================


def evaluate(p: Params, u: FieldVector) -> EnergyBreakdown:
    """I and tau of u with their parts."""
    _check_dimension(p, u)
    quadratic, self_part, coupling = _parts(p, u.grid, u.as_array())
    nonlinear = self_part + coupling
    return EnergyBreakdown(
        quadratic=quadratic,
        self_interaction=self_part,
        coupling=coupling,
        I=quadratic / 2.0 - nonlinear / (2.0 * p.q),
        tau=quadratic - nonlinear,
    )


def gradient(p: Params, u: FieldVector) -> FieldVector:
    """Component-wise PDE residual -Delta u_i + lambda_i u_i - (nonlinear terms).

    Taken with respect to the quadrature inner product, so
    inner(gradient(u)_i, v_i) summed over i is the directional derivative of I.
    """
    _check_dimension(p, u)
    grid = u.grid
    G = _weighted_gradient(p, grid, u.as_array())
    return FieldVector(tuple(RadialField(grid, G[i] / grid.weights) for i in range(p.d)))


def residual_norm(p: Params, u: FieldVector) -> float:
    """Quadrature L2 norm of the full gradient."""
    _check_dimension(p, u)
    grid = u.grid
    G = _weighted_gradient(p, grid, u.as_array())
    return math.sqrt(float(np.sum((G * G) @ (1.0 / grid.weights))))


def nehari_project(p: Params, u: FieldVector) -> tuple[float, FieldVector]:
    """Scale u onto the Nehari manifold: t^{2q-2} = quadratic / (self + coupling)."""
    _check_dimension(p, u)
    if u.is_zero():
        raise ProjectionUndefinedError("cannot project the zero field onto the Nehari manifold")
    quadratic, self_part, coupling = _parts(p, u.grid, u.as_array())
    t = _projection_scalar(p, quadratic, self_part + coupling)
    if t == 1.0:
        return t, u
    return t, u.scaled(t)


def nehari_level(p: Params, u: FieldVector) -> float:
    """I(nehari_project(u)) in closed form: (1/2 - 1/(2q)) (quadratic^q / nonlinear)^{1/(q-1)}."""
    _check_dimension(p, u)
    if u.is_zero():
        raise ProjectionUndefinedError("Nehari level of the zero field is undefined")
    value = _level(p, u.grid, u.as_array())
    if math.isinf(value):
        raise ProjectionUndefinedError("Nehari level undefined: nonlinear part vanishes")
    return value


def fiber_map(p: Params, u: FieldVector, t: float) -> float:
    """T_u(t) = tau(t u) / t^2 = quadratic - t^{2q-2} (self + coupling); strictly decreasing for u != 0."""
    _check_dimension(p, u)
    if not t > 0:
        raise ValueError(f"fiber parameter t must be positive, got {t}")
    quadratic, self_part, coupling = _parts(p, u.grid, u.as_array())
    return quadratic - t ** (2.0 * p.q - 2.0) * (self_part + coupling)


def component_masses(u: FieldVector, q: float) -> List[float]:
    """|u_i|_{2q} for every component."""
    w = u.grid.weights
    return [float(np.dot(w, np.abs(c.values) ** (2.0 * q)) ** (1.0 / (2.0 * q))) for c in u.components]


def classify(u: FieldVector, q: float, tol_null_rel: float = 1e-6) -> Classification:
    """Component i is null iff |u_i|_{2q} < tol_null_rel * max_j |u_j|_{2q}."""
    masses = component_masses(u, q)
    top = max(masses)
    if top == 0.0:
        return Classification(kind="zero", null_components=list(range(u.d)), masses=masses)
    null = [i for i, m in enumerate(masses) if m < tol_null_rel * top]
    kind = "semitrivial" if null else "nontrivial"
    return Classification(kind=kind, null_components=null, masses=masses)

