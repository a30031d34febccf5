"""Command-line driver.

Usage:
  python -m groundstate solve --config configs/scalar_q2.yaml
  python -m groundstate threshold --config configs/threshold_q2.yaml --set threshold.width_tol=0.005
  python -m groundstate audit --config configs/audit_default.yaml --set audit.inject_fault=true

Exit codes: 0 ok, 1 config error, 2 non-convergence, 3 invalid bracket, 4 audit violation.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from groundstate.config import settings
from groundstate.errors import (
    AuditViolationError,
    ConfigError,
    GroundStateError,
    InvalidBracketError,
)
from groundstate.minimize import (
    SolveReport,
    proper_subsets,
    scalar_ground_state,
    solve,
    subsystem_solve,
)
from groundstate.models import RunConfig, load_run_config
from groundstate.study import (
    classification_sweep,
    induction_audit,
    theta_scan,
    threshold_scan,
)
from groundstate.symmetrize import audit_inequalities, random_piecewise_linear, rearrange, scaled_rearranger
from groundstate.writers import (
    AUDIT_HEADER,
    SCAN_HEADER,
    THETA_HEADER,
    scan_rows,
    write_fields_csv,
    write_report,
    write_rows_csv,
    write_trace_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2
EXIT_BRACKET = 3
EXIT_AUDIT = 4

# Output scale applied by the fault-injection rearranger
FAULT_FACTOR = 1.5


class Outputs:
    """File names under the configured output directory."""

    def __init__(self, config: RunConfig, command: str):
        self.dir = Path(config.output.dir)
        self.stem = f"{config.output.prefix}{command}"
        self.write_fields = config.output.write_fields

    def path(self, suffix: str) -> Path:
        return self.dir / f"{self.stem}_{suffix}"


def _problem_dict(config: RunConfig) -> dict:
    return config.problem.model_dump(by_alias=True)


def _solve_body(report: SolveReport) -> dict:
    return {"result": report.to_dict()}


# =============================================================================
# Commands
# =============================================================================


def cmd_solve(config: RunConfig) -> int:
    p = config.problem
    grid = config.grid.build(p)
    out = Outputs(config, "solve")

    report = solve(p, grid, config.solver)

    write_report(out.path("report.yaml"), "solve", _solve_body(report), _problem_dict(config))
    write_trace_csv(out.path("trace.csv"), report.trace)
    if out.write_fields:
        write_fields_csv(out.path("fields.csv"), report.minimizer)

    logger.info(f"Level {report.level:.12g} ({report.classification.label()}), converged={report.converged}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_scalar(config: RunConfig) -> int:
    p = config.problem
    grid = config.grid.build(p)
    out = Outputs(config, "scalar")

    reports = [scalar_ground_state(p, i, grid, config.solver) for i in range(p.d)]
    rows = [
        [i + 1, p.lam[i], p.mu[i], r.level, r.residual, r.converged, r.iterations]
        for i, r in enumerate(reports)
    ]
    write_rows_csv(
        out.path("levels.csv"),
        ["component", "lambda", "mu", "level", "residual", "converged", "iterations"],
        rows,
    )
    body = {"levels": {str(i + 1): r.to_dict() for i, r in enumerate(reports)}}
    write_report(out.path("report.yaml"), "scalar", body, _problem_dict(config))
    if out.write_fields:
        for i, r in enumerate(reports):
            write_fields_csv(out.path(f"fields_{i + 1}.csv"), r.minimizer)

    return EXIT_OK if all(r.converged for r in reports) else EXIT_NONCONVERGED


def cmd_subsystems(config: RunConfig) -> int:
    p = config.problem
    grid = config.grid.build(p)
    out = Outputs(config, "subsystems")

    reports: Dict[tuple, SolveReport] = {
        subset: subsystem_solve(p, subset, grid, config.solver) for subset in proper_subsets(p.d)
    }
    rows = [
        [",".join(str(i + 1) for i in subset), r.level, r.classification.label(), r.residual, r.converged]
        for subset, r in reports.items()
    ]
    write_rows_csv(out.path("levels.csv"), ["subset", "level", "classification", "residual", "converged"], rows)
    body = {"subsystems": {",".join(str(i + 1) for i in s): r.to_dict() for s, r in reports.items()}}
    write_report(out.path("report.yaml"), "subsystems", body, _problem_dict(config))

    return EXIT_OK if all(r.converged for r in reports.values()) else EXIT_NONCONVERGED


def cmd_theta_search(config: RunConfig) -> int:
    p = config.problem
    if p.d < 2:
        raise ConfigError("theta-search needs d >= 2", key="problem.lambda")
    added = p.d - 1 if config.theta.added is None else config.theta.added
    if added >= p.d:
        raise ConfigError(f"theta.added = {added} is out of range for d = {p.d}", key="theta.added")
    grid = config.grid.build(p)
    out = Outputs(config, "theta")

    base_indices = tuple(i for i in range(p.d) if i != added)
    base = subsystem_solve(p, base_indices, grid, config.solver)
    w_report = scalar_ground_state(p, added, grid, config.solver)
    constructions = theta_scan(p, base, w_report.minimizer.components[0], config.theta.grid(), added=added)

    rows = [
        [c.theta, c.t, c.C1, c.C2, c.lhs, c.rhs, c.energy_new, c.energy_base, c.tau_new, c.passes, c.undercuts, c.chain_consistent]
        for c in constructions
    ]
    write_rows_csv(out.path("scan.csv"), THETA_HEADER, rows)

    passing = [c for c in constructions if c.passes]
    best = min(passing, key=lambda c: (c.energy_new, c.theta)) if passing else None
    body = {
        "base_components": [i + 1 for i in base_indices],
        "added_component": added + 1,
        "base_level": base.level,
        "best": best.to_dict() if best else None,
        "passing_thetas": len(passing),
        "chain_consistent": all(c.chain_consistent for c in constructions),
    }
    write_report(out.path("report.yaml"), "theta-search", body, _problem_dict(config))
    if best is not None and out.write_fields:
        write_fields_csv(out.path("fields.csv"), best.field)

    return EXIT_OK if base.converged and w_report.converged else EXIT_NONCONVERGED


def cmd_threshold(config: RunConfig) -> int:
    p = config.problem
    if p.d != 2:
        raise ConfigError(f"threshold needs d = 2, got d = {p.d}", key="problem.lambda")
    grid = config.grid.build(p)
    out = Outputs(config, "threshold")
    body: dict = {}

    if config.threshold.sweep:
        sweep = classification_sweep(p, config.threshold.sweep_values(), grid, config.solver)
        write_rows_csv(out.path("scan.csv"), SCAN_HEADER, scan_rows(sweep))
        levels = [row.level for row in sweep]
        body["sweep"] = {
            "points": len(sweep),
            "all_nontrivial": all(row.nontrivial for row in sweep),
            "unconverged": sum(1 for row in sweep if not row.converged),
            "level_nonincreasing": all(b <= a + 1e-8 * max(1.0, abs(a)) for a, b in zip(levels, levels[1:])),
        }
        for row in sweep:
            if not row.converged:
                logger.warning(f"Sweep point b={row.b:.6g} did not converge (residual {row.residual:.3e})")

    if config.threshold.bracket is not None:
        try:
            result = threshold_scan(p, grid, config.solver, config.threshold.bracket, config.threshold.width_tol)
        except InvalidBracketError as e:
            body["invalid_bracket"] = {
                "bracket": list(config.threshold.bracket),
                "low": e.low_report.to_dict() if e.low_report else None,
                "high": e.high_report.to_dict() if e.high_report else None,
            }
            write_report(out.path("report.yaml"), "threshold", body, _problem_dict(config))
            raise
        write_rows_csv(out.path("bisection.csv"), SCAN_HEADER, scan_rows(result.rows))
        body["bisection"] = result.to_dict()

    write_report(out.path("report.yaml"), "threshold", body, _problem_dict(config))
    return EXIT_OK


def cmd_audit(config: RunConfig) -> int:
    p = config.problem
    audit_cfg = config.audit
    grid = config.grid.build(p)
    out = Outputs(config, "audit")
    rng = np.random.default_rng(config.solver.seed)
    rearranger: Callable = scaled_rearranger(FAULT_FACTOR) if audit_cfg.inject_fault else rearrange
    if audit_cfg.inject_fault:
        logger.warning(f"Fault injection enabled: rearranged fields scaled by {FAULT_FACTOR}")

    rows: List[list] = []
    offending: List[list] = []
    for sample in range(audit_cfg.samples):
        k = audit_cfg.sign_changing_every
        sign_changing = bool(k) and sample % k == k - 1
        u = random_piecewise_linear(grid, p.d, rng, sign_changing=sign_changing, knots=audit_cfg.knots)
        audit = audit_inequalities(u, p, rearranger=rearranger, tau_quad=audit_cfg.tau_quad, band=audit_cfg.band)
        for row in audit.rows:
            line = [sample, row.kind, row.components, row.lhs, row.rhs, row.tolerance, row.slack, row.ok]
            rows.append(line)
            if not row.ok:
                offending.append(line)
    write_rows_csv(out.path("inequalities.csv"), AUDIT_HEADER, rows)
    body: dict = {"inequalities": {"samples": audit_cfg.samples, "rows": len(rows), "violations": len(offending)}}

    induction_ok = True
    if audit_cfg.induction and p.d >= 2 and p.q < 2:
        report = induction_audit(p, grid, config.solver, config.theta.grid())
        body["induction"] = report.to_dict()
        if report.ok:
            logger.info("full < all subsystem levels")
        induction_ok = report.ok
    elif audit_cfg.induction:
        logger.info(f"Induction audit skipped (needs d >= 2 and q < 2; got d={p.d}, q={p.q})")

    write_report(out.path("report.yaml"), "audit", body, _problem_dict(config))

    if offending or not induction_ok:
        failed = [f"sample {r[0]}: {r[1]}[{r[2]}] lhs={r[3]:.6g} rhs={r[4]:.6g}" for r in offending[:20]]
        if not induction_ok:
            failed.append("induction audit checks failed")
        raise AuditViolationError("; ".join(failed), rows=offending)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "solve": cmd_solve,
    "scalar": cmd_scalar,
    "subsystems": cmd_subsystems,
    "theta-search": cmd_theta_search,
    "threshold": cmd_threshold,
    "audit": cmd_audit,
}


# =============================================================================
# Entry point
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundstate",
        description="Ground states of coupled NLS systems by Nehari-manifold minimization on a radial grid",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python -m groundstate solve --config configs/scalar_q2.yaml
  python -m groundstate theta-search --config configs/pair_q15.yaml
  python -m groundstate threshold --config configs/threshold_q2.yaml
  python -m groundstate audit --config configs/audit_default.yaml --set audit.samples=20
        """,
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="Workflow to run")
    parser.add_argument("--config", required=True, type=Path, help="YAML run config")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one config key (dotted path), e.g. solver.max_iter=500",
    )
    parser.add_argument("-o", "--output", type=Path, help="Output directory (overrides output.dir)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=settings.LOG_LEVEL, format=settings.LOG_FORMAT)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    overrides = list(args.overrides)
    if args.output is not None:
        overrides.append(f"output.dir={args.output}")

    try:
        config = load_run_config(args.config, overrides)
        settings.ensure_directories(config.output.dir)
        return COMMANDS[args.command](config)
    except ConfigError as e:
        logger.error(f"Config error in {args.config}: {e}")
        print(f"config error: {args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidBracketError as e:
        logger.error(f"Invalid bracket: {e}")
        print(f"invalid bracket: {e}", file=sys.stderr)
        return EXIT_BRACKET
    except AuditViolationError as e:
        logger.error(f"Audit failed with {len(e.rows)} offending rows")
        print(f"audit violation: {e}", file=sys.stderr)
        return EXIT_AUDIT
    except GroundStateError as e:
        logger.error(f"Solver failure: {e}")
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
