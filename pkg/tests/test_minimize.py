"""Tests for the projected-descent solver and report merging."""

import math
from dataclasses import replace

import numpy as np
import pytest

from groundstate.config import settings
from groundstate.energy import Classification, EnergyBreakdown, FieldVector, residual_norm
from groundstate.errors import ProjectionUndefinedError
from groundstate.minimize import (
    SolveReport,
    merge_reports,
    proper_subsets,
    scalar_level,
    scalar_level_scaling,
    scalar_soliton,
    solve,
    subsystem_solve,
)
from groundstate.models import Params, SolverConfig
from groundstate.radial import RadialField, RadialGrid


def fake_report(grid, level, residual, seed_index, amplitude=1.0):
    u = FieldVector((RadialField.from_function(grid, lambda r: amplitude * np.exp(-r)),))
    energy = EnergyBreakdown(quadratic=4 * level, self_interaction=4 * level, coupling=0.0, I=level, tau=0.0)
    return SolveReport(
        minimizer=u,
        energy=energy,
        level=level,
        residual=residual,
        component_mass=[amplitude],
        classification=Classification(kind="nontrivial", masses=[amplitude]),
        iterations=1,
        converged=True,
        status="converged",
        seed_index=seed_index,
    )


# =============================================================================
# Merging
# =============================================================================


def test_merge_prefers_energy_then_residual_then_seed():
    grid = RadialGrid(n=1, R=5.0, M=50)
    a = fake_report(grid, 1.0, 1e-9, 2)
    b = fake_report(grid, 0.9, 1e-8, 3)
    assert merge_reports([a, b]).seed_index == 3

    c = fake_report(grid, 1.0, 1e-10, 5)
    assert merge_reports([a, c]).seed_index == 5

    d = fake_report(grid, 1.0, 1e-9, 1)
    assert merge_reports([a, d]).seed_index == 1


def test_merge_lists_distinct_equal_energy_minimizers():
    grid = RadialGrid(n=1, R=5.0, M=50)
    a = fake_report(grid, 1.0, 1e-9, 0, amplitude=1.0)
    same = fake_report(grid, 1.0 + 1e-12, 1e-9, 1, amplitude=1.0)
    other = fake_report(grid, 1.0 + 1e-12, 1e-9, 2, amplitude=2.0)
    far = fake_report(grid, 1.1, 1e-9, 3, amplitude=3.0)
    merged = merge_reports([far, other, same, a])
    assert merged.seed_index == 0
    assert [alt.seed_index for alt in merged.alternatives] == [2]


def test_merge_is_associative():
    grid = RadialGrid(n=1, R=5.0, M=50)
    reports = [fake_report(grid, level, 1e-9, i, amplitude=1.0 + i) for i, level in enumerate([1.2, 1.0, 1.0, 0.95])]
    flat = merge_reports(reports)
    nested = merge_reports([merge_reports(reports[:2]), merge_reports(reports[2:])])
    assert (nested.seed_index, nested.level) == (flat.seed_index, flat.level)
    assert [a.seed_index for a in nested.alternatives] == [a.seed_index for a in flat.alternatives]


def test_proper_subsets():
    assert proper_subsets(3, 2) == [(0, 1), (0, 2), (1, 2)]
    assert len(proper_subsets(3)) == 6


def test_scalar_soliton_closed_forms():
    grid = RadialGrid(n=1, R=20.0, M=400)
    np.testing.assert_allclose(
        scalar_soliton(grid, 1.0, 1.0, 2.0).values[:-1], math.sqrt(2.0) / np.cosh(grid.r[:-1]), rtol=1e-14
    )
    np.testing.assert_allclose(
        scalar_soliton(grid, 1.0, 1.0, 1.5).values[:-1], 1.5 / np.cosh(grid.r[:-1] / 2) ** 2, rtol=1e-13
    )


def test_scalar_level_scaling_law():
    assert scalar_level_scaling(1.0, 2.0, 2.0, 1) == pytest.approx(0.5)
    assert scalar_level_scaling(2.0, 1.0, 2.0, 1) == pytest.approx(2.0**1.5)


def test_degenerate_init_is_rejected(coarse_line_grid, scalar_q2):
    zero = FieldVector((RadialField.zeros(coarse_line_grid),))
    with pytest.raises(ProjectionUndefinedError):
        solve(scalar_q2, coarse_line_grid, SolverConfig(multistart=1), init=zero)


def test_subsystem_must_be_proper(coarse_line_grid, pair_q15):
    with pytest.raises(ValueError):
        subsystem_solve(pair_q15, [0, 1], coarse_line_grid)
    with pytest.raises(ValueError):
        subsystem_solve(pair_q15, [], coarse_line_grid)


def test_solver_handles_growth_close_to_linear():
    p = Params(n=1, q=1.05, lam=[1.0], mu=[0.1])
    grid = RadialGrid(n=1, R=20.0, M=400)
    report = solve(p, grid, SolverConfig(multistart=1, max_iter=50))
    assert math.isfinite(report.level) and report.level > 0
    assert abs(report.energy.tau) <= 1e-8 * report.energy.quadratic
    assert all(math.isfinite(level) for level, _ in report.trace)


# =============================================================================
# Solver
# =============================================================================


@pytest.mark.slow
def test_scalar_cubic_soliton(line_grid, scalar_q2):
    cfg = SolverConfig(multistart=1, max_iter=3000)
    report = solve(scalar_q2, line_grid, cfg)
    assert report.converged
    assert report.level == pytest.approx(4.0 / 3.0, rel=1e-3)
    exact = math.sqrt(2.0) / np.cosh(line_grid.r)
    assert np.max(np.abs(report.minimizer.as_array()[0] - exact)) <= 1e-3
    assert abs(report.energy.tau) <= 1e-6 * report.energy.quadratic
    assert report.classification.kind == "nontrivial"
    assert report.boundary_value < 1e-6


@pytest.mark.slow
def test_scalar_level_is_second_order(scalar_q2):
    cfg = SolverConfig(multistart=1, max_iter=3000, tol_residual=1e-9)
    coarse = RadialGrid(n=1, R=20.0, M=2000)
    errors = []
    for grid in (coarse, coarse.refined()):
        errors.append(abs(solve(scalar_q2, grid, cfg).level - 4.0 / 3.0))
    assert errors[0] / errors[1] >= 3.0


@pytest.mark.slow
def test_scalar_quadratic_soliton(line_grid):
    p = Params(n=1, q=1.5, lam=[1.0], mu=[1.0])
    report = solve(p, line_grid, SolverConfig(multistart=1, max_iter=3000))
    assert report.converged
    exact = 1.5 / np.cosh(line_grid.r / 2) ** 2
    assert np.max(np.abs(report.minimizer.as_array()[0] - exact)) <= 1e-3


@pytest.mark.slow
def test_pair_q15_is_nontrivial(coarse_line_grid, pair_q15, fast_solver):
    report = solve(pair_q15, coarse_line_grid, fast_solver)
    assert report.converged
    assert report.classification.kind == "nontrivial"
    U = report.minimizer.as_array()
    assert np.all(U[:, 0] > 0)
    assert np.all(np.diff(U, axis=1) <= 0)
    assert residual_norm(pair_q15, report.minimizer) <= 10 * fast_solver.tol_residual
    assert abs(report.energy.tau) <= 1e-6 * report.energy.quadratic


@pytest.mark.slow
def test_scalar_level_scaling_by_two_solves(scalar_q2):
    grid = RadialGrid(n=1, R=20.0, M=2000)
    cfg = SolverConfig(multistart=1, max_iter=3000)
    base = scalar_level(scalar_q2, 0, grid, cfg)

    heavy = Params(n=1, q=2.0, lam=[1.0], mu=[2.0])
    assert scalar_level(heavy, 0, grid, cfg) / base == pytest.approx(scalar_level_scaling(1.0, 2.0, 2.0, 1), rel=1e-3)

    stiff = Params(n=1, q=2.0, lam=[2.0], mu=[1.0])
    assert scalar_level(stiff, 0, grid, cfg) / base == pytest.approx(scalar_level_scaling(2.0, 1.0, 2.0, 1), rel=1e-3)


@pytest.mark.slow
def test_singleton_subsystem_matches_scalar_level(coarse_line_grid, pair_q15, fast_solver):
    sub = subsystem_solve(pair_q15, [1], coarse_line_grid, fast_solver)
    assert sub.indices == (1,)
    assert sub.level == pytest.approx(scalar_level(pair_q15, 1, coarse_line_grid, fast_solver), rel=1e-12)


@pytest.mark.slow
def test_symmetric_subsystems_coincide(coarse_line_grid, fast_solver):
    p = Params(n=1, q=1.5, lam=[1.0, 1.0, 1.0], mu=[1.0, 1.0, 1.0], b=0.2)
    levels = [subsystem_solve(p, s, coarse_line_grid, fast_solver).level for s in proper_subsets(3, 2)]
    assert max(levels) - min(levels) <= 1e-4 * abs(levels[0])


@pytest.mark.slow
def test_determinism_and_worker_independence(coarse_line_grid, pair_q15, fast_solver):
    first = solve(pair_q15, coarse_line_grid, fast_solver)
    second = solve(pair_q15, coarse_line_grid, fast_solver)
    pooled = solve(pair_q15, coarse_line_grid, fast_solver.model_copy(update={"workers": 3}))
    for other in (second, pooled):
        np.testing.assert_array_equal(first.minimizer.as_array(), other.minimizer.as_array())
        assert first.trace == other.trace
        assert first.seed_index == other.seed_index


@pytest.mark.slow
def test_trace_is_nonincreasing(coarse_line_grid, pair_q15):
    plain = solve(pair_q15, coarse_line_grid, SolverConfig(multistart=1, symmetrize_every=0, semitrivial_seeds=False))
    levels = [J for J, _ in plain.trace]
    assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(levels, levels[1:]))

    symmetrized = solve(pair_q15, coarse_line_grid, SolverConfig(multistart=1, symmetrize_every=5, semitrivial_seeds=False))
    levels = [J for J, _ in symmetrized.trace]
    assert all(b <= a + settings.TAU_QUAD * max(1.0, abs(a)) for a, b in zip(levels, levels[1:]))


@pytest.mark.slow
def test_non_convergence_is_a_status(coarse_line_grid, pair_q15):
    report = solve(pair_q15, coarse_line_grid, SolverConfig(multistart=1, max_iter=3, semitrivial_seeds=False))
    assert not report.converged
    assert report.status in ("max_iter", "stalled")
    assert report.iterations <= 3


def test_merge_flattens_nested_alternatives():
    grid = RadialGrid(n=1, R=5.0, M=50)
    a = fake_report(grid, 1.0, 1e-9, 0)
    merged = merge_reports([replace(a, alternatives=[fake_report(grid, 0.5, 1e-9, 4, amplitude=2.0)])])
    assert merged.seed_index == 4
    assert [alt.seed_index for alt in merged.alternatives] == []
