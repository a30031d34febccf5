#!/usr/bin/env python3
"""
Randomized parameter sweep for the sublinear regime (1 < q < 2).

Draws lambda, mu and every coupling b_ij (i < j, mirrored below the diagonal)
log-uniformly for each (q, d) cell, solves the full system and records
convergence, classification and, with --check-subsystems, the induction audit:
every (d-1)-subsystem level, the theta search and the three-way comparison
chain. The b column holds the upper triangle b_12;b_13;...;b_(d-1)d.

Usage:
    python scripts/random_parameter_sweep.py
    python scripts/random_parameter_sweep.py --draws 3 --cells 500 -o output/sweep.csv
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from groundstate.config import settings
from groundstate.errors import GroundStateError
from groundstate.minimize import solve
from groundstate.models import GridConfig, Params, SolverConfig
from groundstate.study import induction_audit
from groundstate.writers import write_rows_csv

logger = logging.getLogger("random_parameter_sweep")

Q_VALUES = (1.2, 1.5, 1.9)
D_VALUES = (2, 3)
HEADER = [
    "q", "d", "draw", "lambda", "mu", "b", "level", "classification", "converged", "residual",
    "iterations", "positive_at_origin", "subsystem_min", "below_subsystems", "theta_found",
    "chain_consistent", "error",
]


def log_uniform(rng: np.random.Generator, low: float, high: float, size=None):
    return np.exp(rng.uniform(math.log(low), math.log(high), size=size))


def coupling_matrix(rng: np.random.Generator, d: int) -> np.ndarray:
    """Symmetric d x d coupling with independent log-uniform b_ij in [0.01, 2] above the diagonal."""
    upper = np.triu_indices(d, k=1)
    b = np.zeros((d, d))
    b[upper] = log_uniform(rng, 1e-2, 2.0, len(upper[0]))
    return b + b.T


def run_cell(q: float, d: int, draws: int, rng: np.random.Generator, args) -> List[list]:
    rows = []
    cfg = SolverConfig(max_iter=args.max_iter, multistart=args.multistart, tol_null_rel=1e-10, seed=args.seed)
    for draw in range(draws):
        lam = [float(x) for x in log_uniform(rng, 0.5, 4.0, d)]
        mu = [float(x) for x in log_uniform(rng, 0.5, 4.0, d)]
        b = coupling_matrix(rng, d)
        p = Params(n=1, q=q, lam=lam, mu=mu, b=b.tolist())
        grid = GridConfig(M=args.cells).build(p)

        row = [q, d, draw, lam, mu, [float(x) for x in b[np.triu_indices(d, k=1)]]]
        try:
            if args.check_subsystems:
                audit = induction_audit(p, grid, cfg)
                report = audit.full
                extra = [
                    min(audit.subsystem_levels.values()),
                    audit.margin > 0,
                    audit.checks["theta_found"] and audit.checks["energy_drop"],
                    audit.checks["chain_consistent"],
                ]
            else:
                report = solve(p, grid, cfg)
                extra = [math.nan, "", "", ""]
            positive = bool(np.all(report.minimizer.as_array()[:, 0] > 0))
            row += [
                report.level,
                report.classification.label(),
                report.converged,
                report.residual,
                report.iterations,
                positive,
                *extra,
                "",
            ]
        except GroundStateError as e:
            logger.error(f"q={q} d={d} draw {draw}: {e}")
            row += [math.nan, "", False, math.nan, 0, False, math.nan, "", "", "", type(e).__name__]
        rows.append(row)
    return rows


def main():
    parser = argparse.ArgumentParser(
        description="Randomized sweep of admissible sublinear systems",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python scripts/random_parameter_sweep.py
  python scripts/random_parameter_sweep.py --draws 3 --check-subsystems
        """,
    )
    parser.add_argument("--draws", type=int, default=10, help="Draws per (q, d) cell (default: 10)")
    parser.add_argument("--cells", type=int, default=1000, help="Grid cells M (default: 1000)")
    parser.add_argument("--max-iter", type=int, default=3000, help="Solver iteration cap")
    parser.add_argument("--multistart", type=int, default=2, help="Gaussian starts per solve")
    parser.add_argument("--seed", type=int, default=0, help="Seed for parameter draws and multistart")
    parser.add_argument("--check-subsystems", action="store_true", help="Run the induction audit for every draw")
    parser.add_argument(
        "-o", "--output", type=Path, default=settings.OUTPUT_DIR / "random_parameter_sweep.csv", help="CSV output"
    )
    args = parser.parse_args()

    logging.basicConfig(level=settings.LOG_LEVEL, format=settings.LOG_FORMAT)
    rng = np.random.default_rng(args.seed)

    rows: List[list] = []
    for q in Q_VALUES:
        for d in D_VALUES:
            rows.extend(run_cell(q, d, args.draws, rng, args))

    write_rows_csv(args.output, HEADER, rows)

    total = len(rows)
    failed = sum(1 for r in rows if r[-1])
    unconverged = sum(1 for r in rows if not r[-1] and not r[8])
    converged = [r for r in rows if r[8]]
    nontrivial = sum(1 for r in converged if r[7] == "nontrivial" and r[11])
    print(f"Solves: {total}")
    print(f"  converged: {len(converged)}, nontrivial and positive at r=0: {nontrivial}")
    print(f"  not converged: {unconverged} ({unconverged / total:.1%})")
    print(f"  exceptions: {failed}")
    if args.check_subsystems:
        below = sum(1 for r in converged if r[13] is True)
        found = sum(1 for r in converged if r[14] is True)
        chain = sum(1 for r in converged if r[15] is True)
        print(f"  below all subsystems: {below}, theta found: {found}, chain consistent: {chain}")
    print(f"Results: {args.output}")
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
