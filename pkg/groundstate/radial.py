"""Radial grid and discrete calculus for radially symmetric functions on R^n.

A function u(|x|) on R^n is sampled at the nodes r_k = k*h, k = 0..M, of the
truncated interval [0, R], with u(r_M) = 0 standing in for decay at infinity.

Quadrature uses shell measures: node k owns the spherical shell between the
neighbouring half-nodes, so the weights sum to the volume of the ball of
radius R exactly and the weight at the origin is O(h^n).

The Dirichlet integral is taken over the faces r_{k+1/2}; the Laplacian is its
exact adjoint with respect to the node quadrature.  This keeps

    <-Laplacian(u), u>_w == gradient_sq(u)

an identity of the discrete formulas, reproduces Delta u(0) = 2n(u_1 - u_0)/h^2
and is exact on quadratics.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from groundstate.errors import GridMismatchError

logger = logging.getLogger(__name__)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n (2 for n = 1, both half-lines)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int, radius: float) -> float:
    """Volume of the ball of given radius in R^n."""
    return sphere_area(n) / n * radius**n


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform radial grid on [0, R] with M cells.

    Attributes:
        n: spatial dimension
        R: truncation radius
        M: number of cells (M + 1 nodes)
        r: node positions
        h: spacing R / M
        weights: node quadrature weights (shell measures)
        face_weights: omega * r_{k+1/2}^{n-1} * h for the M faces
    """

    n: int
    R: float
    M: int
    r: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)
    weights: np.ndarray = field(init=False, repr=False)
    face_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension n must be >= 1, got {self.n}")
        if not self.R > 0:
            raise ValueError(f"truncation radius R must be > 0, got {self.R}")
        if self.M < 8:
            raise ValueError(f"number of cells M must be >= 8, got {self.M}")

        h = self.R / self.M
        r = np.arange(self.M + 1, dtype=float) * h
        omega = sphere_area(self.n)

        half = (np.arange(self.M, dtype=float) + 0.5) * h
        outer = np.append(half, self.R)
        inner = np.insert(half, 0, 0.0)
        weights = omega / self.n * (outer**self.n - inner**self.n)
        face_weights = omega * half ** (self.n - 1) * h

        for arr in (r, weights, face_weights):
            arr.setflags(write=False)

        object.__setattr__(self, "h", h)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "face_weights", face_weights)

    @property
    def size(self) -> int:
        """Number of nodes."""
        return self.M + 1

    def matches(self, other: "RadialGrid") -> bool:
        """True when both grids sample the same nodes with the same measure."""
        return self is other or (
            self.n == other.n and self.M == other.M and self.R == other.R
        )

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same domain with `factor` times as many cells."""
        return RadialGrid(n=self.n, R=self.R, M=self.M * factor)

    def integrate(self, values: np.ndarray) -> float:
        """Quadrature of node values over the ball."""
        return float(np.dot(self.weights, values))

    def stiffness_bands(self, lam: float) -> np.ndarray:
        """Upper banded form of K + lam*W on the free nodes 0..M-1.

        K is the Hessian of the Dirichlet integral and W the diagonal of weights;
        the layout is the one `scipy.linalg.solveh_banded` expects.
        """
        s = self.face_weights / self.h**2
        diag = lam * self.weights[:-1] + s
        diag[1:] += s[:-1]
        bands = np.zeros((2, self.M))
        bands[0, 1:] = -s[:-1]
        bands[1, :] = diag
        return bands


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples u(r_k) of one radial profile; u(r_M) = 0 always holds."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(
                f"field has shape {values.shape}, grid expects ({self.grid.size},)"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite samples")
        if values[-1] != 0.0:
            raise ValueError(
                f"field violates the Dirichlet condition u(R) = 0 (got {values[-1]!r})"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "RadialField":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid: RadialGrid, f: Callable[[np.ndarray], np.ndarray]) -> "RadialField":
        """Sample f on the grid and clamp the boundary node to zero."""
        values = np.asarray(f(grid.r), dtype=float).copy()
        values[-1] = 0.0
        return cls(grid, values)

    @classmethod
    def from_values(cls, grid: RadialGrid, values: np.ndarray) -> "RadialField":
        """Like the constructor, but clamps the boundary node to zero."""
        values = np.array(values, dtype=float)
        values[-1] = 0.0
        return cls(grid, values)

    def scaled(self, t: float) -> "RadialField":
        return RadialField(self.grid, t * self.values)

    def abs(self) -> "RadialField":
        return RadialField(self.grid, np.abs(self.values))

    def is_zero(self) -> bool:
        return not np.any(self.values)


def _check_same_grid(u: RadialField, v: RadialField) -> None:
    if not u.grid.matches(v.grid):
        raise GridMismatchError(
            f"fields live on different grids: (n={u.grid.n}, R={u.grid.R}, M={u.grid.M}) "
            f"vs (n={v.grid.n}, R={v.grid.R}, M={v.grid.M})"
        )


def stiffness_apply(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    """K u: gradient of gradient_sq/2 with respect to the node values."""
    flux = grid.face_weights * np.diff(values) / grid.h**2
    out = np.zeros(grid.size)
    out[:-1] -= flux
    out[1:] += flux
    return out


def laplacian(u: RadialField) -> RadialField:
    """Radial Laplacian u'' + (n-1)/r u' as the quadrature adjoint of the Dirichlet form.

    The boundary node carries the Dirichlet value 0.
    """
    grid = u.grid
    out = -stiffness_apply(grid, u.values) / grid.weights
    out[-1] = 0.0
    return RadialField(grid, out)


def gradient_sq(u: RadialField) -> float:
    """Discrete Dirichlet integral |grad u|_2^2 over the ball."""
    grid = u.grid
    slopes = np.diff(u.values) / grid.h
    return float(np.dot(grid.face_weights, slopes * slopes))


def grad_norm(u: RadialField) -> float:
    return math.sqrt(gradient_sq(u))


def inner(u: RadialField, v: RadialField) -> float:
    """Quadrature inner product <u, v>."""
    _check_same_grid(u, v)
    return u.grid.integrate(u.values * v.values)


def norm_lambda_sq(u: RadialField, lam: float) -> float:
    """||u||_lambda^2 = |grad u|_2^2 + lambda |u|_2^2."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    mass = u.grid.integrate(u.values * u.values)
    return gradient_sq(u) + lam * mass


def lp_norm(u: RadialField, p: float) -> float:
    """|u|_p on the ball of radius R."""
    if not p >= 1:
        raise ValueError(f"L^p exponent must be >= 1, got {p}")
    return u.grid.integrate(np.abs(u.values) ** p) ** (1.0 / p)


def lp_power(u: RadialField, p: float) -> float:
    """|u|_p^p without the final root (the quantity the energy needs)."""
    if not p >= 1:
        raise ValueError(f"L^p exponent must be >= 1, got {p}")
    return u.grid.integrate(np.abs(u.values) ** p)


def mixed_term(u: RadialField, v: RadialField, q: float) -> float:
    """|u v|_q^q."""
    _check_same_grid(u, v)
    if not q > 1:
        raise ValueError(f"coupling exponent q must be > 1, got {q}")
    return u.grid.integrate(np.abs(u.values * v.values) ** q)
