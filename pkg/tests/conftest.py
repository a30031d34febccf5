"""Shared fixtures."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from groundstate.models import Params, SolverConfig  # noqa: E402
from groundstate.radial import RadialGrid  # noqa: E402


@pytest.fixture
def line_grid() -> RadialGrid:
    """n = 1, R = 20, h = 0.005."""
    return RadialGrid(n=1, R=20.0, M=4000)


@pytest.fixture
def coarse_line_grid() -> RadialGrid:
    return RadialGrid(n=1, R=20.0, M=1000)


@pytest.fixture
def scalar_q2() -> Params:
    return Params(n=1, q=2.0, lam=[1.0], mu=[1.0])


@pytest.fixture
def pair_q15() -> Params:
    return Params(n=1, q=1.5, lam=[1.0, 2.0], mu=[1.0, 1.0], b=0.1)


@pytest.fixture
def fast_solver() -> SolverConfig:
    return SolverConfig(max_iter=3000, tol_residual=1e-8, multistart=2, seed=7)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def smooth_positive_field(grid: RadialGrid, rng: np.random.Generator, width: float = 2.0) -> np.ndarray:
    """Strictly positive interior samples with Gaussian-like decay and a random ripple."""
    a = rng.uniform(0.1, 0.6)
    k = rng.uniform(0.5, 2.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    amp = rng.uniform(0.5, 2.0)
    r = grid.r
    values = amp * (1.0 + a * np.sin(k * r + phase)) * np.exp(-(r / width) ** 2) * (1.0 - r / grid.R)
    values[-1] = 0.0
    return values


@pytest.fixture
def positive_field():
    return smooth_positive_field
