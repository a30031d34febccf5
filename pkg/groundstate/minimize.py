"""Ground states by projected descent on the Nehari manifold.

One run iterates

    1. p = (K + lambda_i W)^{-1} G      (gradient in the lambda-metric)
    2. Armijo backtracking on J(u - alpha p), J = I o projection
    3. every `symmetrize_every` steps: replace components by their rearrangement
    4. projection onto the manifold

until the tangential residual drops below tol_residual. With alpha <= 1 the
step is a convex combination of u and (K + lambda W)^{-1} W f(u), so
nonnegative iterates stay nonnegative.

Multistart runs (Gaussian seeds with random amplitudes plus one semitrivial
seed per component) are independent and can be fanned out to a thread pool;
their reports are merged deterministically.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded

from groundstate.config import settings
from groundstate.energy import (
    Classification,
    EnergyBreakdown,
    FieldVector,
    _level,
    _parts,
    _projection_scalar,
    _weighted_gradient,
    classify,
    evaluate,
    nehari_project,
)
from groundstate.errors import DimensionMismatchError, ProjectionUndefinedError
from groundstate.models import Params, SolverConfig
from groundstate.radial import RadialField, RadialGrid
from groundstate.symmetrize import rearrange

logger = logging.getLogger(__name__)

# Relative slack on the Armijo test for rounding in the energy sums
ENERGY_NOISE = 1e-13

# Two minimizers are the same when they differ by less than this (relative, sup norm)
DISTINCT_FIELD_REL = 1e-4

# Equal-energy window for listing alternative minimizers
EQUAL_LEVEL_REL = 1e-8


@dataclass
class SolveReport:
    """Outcome of one run or of a merged multistart."""

    minimizer: FieldVector
    energy: EnergyBreakdown
    level: float
    residual: float
    component_mass: List[float]
    classification: Classification
    iterations: int
    trace: List[tuple] = field(default_factory=list)
    converged: bool = False
    status: str = "max_iter"
    seed_index: int = 0
    seed_kind: str = "gaussian"
    indices: tuple = ()
    boundary_value: float = 0.0
    alternatives: List["SolveReport"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "residual": self.residual,
            "converged": self.converged,
            "status": self.status,
            "iterations": self.iterations,
            "classification": self.classification.label(),
            "component_mass": list(self.component_mass),
            "energy": self.energy.to_dict(),
            "boundary_value": self.boundary_value,
            "seed_index": self.seed_index,
            "seed_kind": self.seed_kind,
            "components": [i + 1 for i in self.indices],
            "alternatives": [
                {"level": alt.level, "classification": alt.classification.label(), "seed_index": alt.seed_index}
                for alt in self.alternatives
            ],
        }


# =============================================================================
# Closed forms and seeds
# =============================================================================


def scalar_soliton(grid: RadialGrid, lam: float, mu: float, q: float) -> RadialField:
    """Positive solution of -u'' + lam u = mu |u|^{2q-2} u on the line (n = 1).

    u(r) = (q lam / mu)^{1/(2q-2)} sech^{1/(q-1)}((q-1) sqrt(lam) r)
    """
    amplitude = (q * lam / mu) ** (1.0 / (2.0 * q - 2.0))
    return RadialField.from_function(
        grid, lambda r: amplitude / np.cosh((q - 1.0) * math.sqrt(lam) * r) ** (1.0 / (q - 1.0))
    )


def gaussian_seed(grid: RadialGrid, p: Params) -> np.ndarray:
    """exp(-lambda_i r^2) per component, scaled to unit L^{2q} norm."""
    U = np.exp(-np.outer(np.asarray(p.lam), grid.r**2))
    U[:, -1] = 0.0
    norms = (np.abs(U) ** (2.0 * p.q) @ grid.weights) ** (1.0 / (2.0 * p.q))
    return U / norms[:, None]


# =============================================================================
# Single run
# =============================================================================


class _Preconditioner:
    """Banded Cholesky factors of K + lambda_i W, one per component."""

    def __init__(self, grid: RadialGrid, p: Params):
        self.factors = [cholesky_banded(grid.stiffness_bands(lam)) for lam in p.lam]

    def apply(self, G: np.ndarray) -> np.ndarray:
        P = np.zeros_like(G)
        for i, factor in enumerate(self.factors):
            P[i, :-1] = cho_solve_banded((factor, False), G[i, :-1])
        return P


def _tangential_residual(grid: RadialGrid, U: np.ndarray, G: np.ndarray) -> float:
    """L2 norm of the gradient with its component along u removed."""
    inv_w = 1.0 / grid.weights
    uu = float(np.sum((U * U) @ grid.weights))
    gu = float(np.sum(G * U))
    T = G - (gu / uu) * (U * grid.weights) if uu > 0 else G
    return math.sqrt(float(np.sum((T * T) @ inv_w)))


def _project_array(p: Params, grid: RadialGrid, U: np.ndarray) -> np.ndarray:
    quadratic, self_part, coupling = _parts(p, grid, U)
    nonlinear = self_part + coupling
    if not nonlinear > 0 or not quadratic > 0:
        raise ProjectionUndefinedError("iterate left the domain of the Nehari projection")
    return U * _projection_scalar(p, quadratic, nonlinear)


def _rearrange_array(grid: RadialGrid, U: np.ndarray) -> np.ndarray:
    return np.vstack([rearrange(RadialField(grid, row)).field.values for row in U])


def _descend(
    p: Params,
    grid: RadialGrid,
    cfg: SolverConfig,
    U0: np.ndarray,
    seed_index: int = 0,
    seed_kind: str = "gaussian",
    indices: Sequence[int] = (),
) -> SolveReport:
    precond = _Preconditioner(grid, p)
    U = np.array(U0, dtype=float)
    U[:, -1] = 0.0
    U = _project_array(p, grid, U)
    J = _level(p, grid, U)

    trace: List[tuple] = []
    status = "max_iter"
    converged = False
    iterations = 0
    residual = math.inf

    for iteration in range(cfg.max_iter + 1):
        G = _weighted_gradient(p, grid, U)
        residual = _tangential_residual(grid, U, G)
        trace.append((J, residual))
        iterations = iteration
        if residual < cfg.tol_residual:
            status, converged = "converged", True
            break
        if iteration == cfg.max_iter:
            break

        P = precond.apply(G)
        slope = float(np.sum(G * P))
        alpha = cfg.step0
        accepted = None
        while alpha >= cfg.min_step:
            V = U - alpha * P
            J_new = _level(p, grid, V)
            if J_new <= J - cfg.armijo_c * alpha * slope + ENERGY_NOISE * max(1.0, abs(J)):
                accepted = (V, J_new)
                break
            alpha *= cfg.armijo_factor
        if accepted is None:
            status = "stalled"
            logger.warning(f"Line search stalled at iteration {iteration} (residual {residual:.3e})")
            break

        U = _project_array(p, grid, accepted[0])
        J = accepted[1]

        if cfg.symmetrize_every and (iteration + 1) % cfg.symmetrize_every == 0:
            S = _rearrange_array(grid, U)
            J_sym = _level(p, grid, S)
            if J_sym <= J + settings.TAU_QUAD * max(1.0, abs(J)):
                U = _project_array(p, grid, S)
                J = J_sym
            else:
                logger.warning(f"Rearrangement raised the level ({J:.12g} -> {J_sym:.12g}); step rejected")

        if iteration % 100 == 0:
            logger.debug(f"iter {iteration}: level={J:.15g} residual={residual:.3e} alpha={alpha:.3g}")

    u = FieldVector.from_array(grid, U)
    energy = evaluate(p, u)
    classification = classify(u, p.q, cfg.tol_null_rel)
    peak = float(np.max(np.abs(U))) or 1.0
    report = SolveReport(
        minimizer=u,
        energy=energy,
        level=energy.I,
        residual=residual,
        component_mass=list(classification.masses),
        classification=classification,
        iterations=iterations,
        trace=trace,
        converged=converged,
        status=status,
        seed_index=seed_index,
        seed_kind=seed_kind,
        indices=tuple(indices) if indices else tuple(range(p.d)),
        boundary_value=float(np.max(np.abs(U[:, -2]))) / peak,
    )
    log = logger.info if converged else logger.warning
    log(
        f"Run {seed_index} ({seed_kind}): level={report.level:.12g} residual={residual:.3e} "
        f"iterations={iterations} status={status} classification={classification.label()}"
    )
    return report


# =============================================================================
# Multistart and merging
# =============================================================================


def _report_key(report: SolveReport) -> tuple:
    return (report.level, report.residual, report.seed_index)


def _same_minimizer(a: SolveReport, b: SolveReport) -> bool:
    A, B = a.minimizer.as_array(), b.minimizer.as_array()
    scale = max(float(np.max(np.abs(A))), float(np.max(np.abs(B))), 1e-300)
    return float(np.max(np.abs(A - B))) <= DISTINCT_FIELD_REL * scale


def merge_reports(reports: Sequence[SolveReport]) -> SolveReport:
    """Best report by (level, residual, seed order).

    Distinct minimizers within EQUAL_LEVEL_REL of the best level are kept as
    alternatives. The result depends only on the multiset of candidates.
    """
    candidates: List[SolveReport] = []
    for report in reports:
        candidates.append(replace(report, alternatives=[]))
        candidates.extend(replace(alt, alternatives=[]) for alt in report.alternatives)
    if not candidates:
        raise ValueError("merge_reports needs at least one report")
    candidates.sort(key=_report_key)

    best = candidates[0]
    window = EQUAL_LEVEL_REL * max(1.0, abs(best.level))
    alternatives: List[SolveReport] = []
    for candidate in candidates[1:]:
        if candidate.level - best.level > window:
            break
        if _same_minimizer(candidate, best) or any(_same_minimizer(candidate, a) for a in alternatives):
            continue
        alternatives.append(candidate)
    return replace(best, alternatives=alternatives)


def _seed_arrays(
    p: Params, grid: RadialGrid, cfg: SolverConfig, init: Optional[FieldVector]
) -> List[tuple]:
    """(kind, array) for every run, in seed order."""
    seeds: List[tuple] = []
    if init is not None:
        seeds.append(("init", init.as_array()))

    base = gaussian_seed(grid, p)
    seeds.append(("gaussian", base))
    children = np.random.SeedSequence(cfg.seed).spawn(max(cfg.multistart - 1, 0))
    low, high = cfg.amplitude_range
    for child in children:
        rng = np.random.default_rng(child)
        amplitudes = np.exp(rng.uniform(math.log(low), math.log(high), size=p.d))
        seeds.append(("perturbed", base * amplitudes[:, None]))

    if cfg.semitrivial_seeds and p.d >= 2:
        scalar_cfg = cfg.model_copy(update={"multistart": 1, "semitrivial_seeds": False, "workers": 1})
        for i in range(p.d):
            scalar = _descend(p.restrict([i]), grid, scalar_cfg, base[i : i + 1], seed_kind="scalar")
            seed = cfg.seed_perturbation * base.copy()
            seed[i] = scalar.minimizer.components[0].values
            seeds.append((f"semitrivial_{i + 1}", seed))
    return seeds


def run_multistart(
    p: Params, grid: RadialGrid, cfg: SolverConfig, init: Optional[FieldVector] = None
) -> List[SolveReport]:
    """Every run of a multistart, in seed order."""
    if init is not None:
        if init.d != p.d:
            raise DimensionMismatchError(f"init has {init.d} components, parameters describe d = {p.d}")
        nehari_project(p, init)

    seeds = _seed_arrays(p, grid, cfg, init)
    jobs = [(index, kind, U0) for index, (kind, U0) in enumerate(seeds)]

    def run(job: tuple) -> SolveReport:
        index, kind, U0 = job
        return _descend(p, grid, cfg, U0, seed_index=index, seed_kind=kind)

    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(run, jobs))
    return [run(job) for job in jobs]


def solve(
    p: Params, grid: RadialGrid, cfg: Optional[SolverConfig] = None, init: Optional[FieldVector] = None
) -> SolveReport:
    """Ground-state candidate: best projected-descent run over the multistart seeds."""
    cfg = cfg or SolverConfig()
    logger.info(f"Solving d={p.d} n={p.n} q={p.q} on R={grid.R:.6g} M={grid.M} ({cfg.multistart} starts)")
    report = merge_reports(run_multistart(p, grid, cfg, init))
    if not report.converged:
        logger.warning(f"Best run did not converge (residual {report.residual:.3e} after {report.iterations} iterations)")
    return report


def subsystem_solve(
    p: Params, indices: Sequence[int], grid: RadialGrid, cfg: Optional[SolverConfig] = None
) -> SolveReport:
    """Ground state of the system restricted to a nonempty proper subset of components."""
    subset = sorted(set(indices))
    if not subset or len(subset) >= p.d:
        raise ValueError(f"subset {[i + 1 for i in subset]} must be a nonempty proper subset of 1..{p.d}")
    report = solve(p.restrict(subset), grid, cfg)
    report.indices = tuple(subset)
    for alt in report.alternatives:
        alt.indices = tuple(subset)
    return report


def scalar_ground_state(p: Params, i: int, grid: RadialGrid, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Positive ground state of equation i alone."""
    cfg = cfg or SolverConfig()
    report = solve(p.restrict([i]), grid, cfg.model_copy(update={"semitrivial_seeds": False}))
    report.indices = (i,)
    return report


def scalar_level(p: Params, i: int, grid: RadialGrid, cfg: Optional[SolverConfig] = None) -> float:
    """c_i: level of the positive ground state of -Delta u + lambda_i u = mu_i |u|^{2q-2} u."""
    return scalar_ground_state(p, i, grid, cfg).level


def scalar_level_scaling(lam: float, mu: float, q: float, n: int) -> float:
    """c(lam, mu) / c(1, 1) = lam^{q/(q-1) - n/2} mu^{-1/(q-1)}."""
    return lam ** (q / (q - 1.0) - n / 2.0) * mu ** (-1.0 / (q - 1.0))


def proper_subsets(d: int, size: Optional[int] = None) -> List[tuple]:
    """Nonempty proper subsets of range(d) (of one size when given), in lexicographic order."""
    sizes = [size] if size is not None else range(1, d)
    return [subset for k in sizes for subset in itertools.combinations(range(d), k)]
