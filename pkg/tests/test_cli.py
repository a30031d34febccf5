"""End-to-end tests of the command-line driver on small grids."""

import textwrap
from pathlib import Path

import pytest
import yaml

from groundstate.cli import EXIT_AUDIT, EXIT_BRACKET, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_OK, main

SCALAR = """\
schema_version: 1
problem:
  n: 1
  q: 2.0
  lambda: [1.0]
  mu: [1.0]
grid:
  R: 20.0
  M: 400
solver:
  multistart: 1
  max_iter: 3000
"""

PAIR = """\
schema_version: 1
problem:
  n: 1
  q: 1.5
  lambda: [1.0, 2.0]
  mu: [1.0, 1.0]
  b: 0.1
grid:
  R: 20.0
  M: 400
solver:
  multistart: 1
  max_iter: 3000
  tol_null_rel: 1.0e-10
audit:
  samples: 6
  induction: false
threshold:
  sweep: false
"""


@pytest.fixture
def write_config(tmp_path):
    def write(text: str, name: str = "run.yaml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text), encoding="utf-8")
        return path

    return write


@pytest.mark.slow
def test_solve_writes_report_and_fields(write_config, tmp_path):
    out = tmp_path / "out"
    code = main(["solve", "--config", str(write_config(SCALAR)), "-o", str(out)])
    assert code == EXIT_OK
    report = yaml.safe_load((out / "solve_report.yaml").read_text(encoding="utf-8"))
    assert report["report"] == "solve"
    assert report["problem"]["lambda"] == [1.0]
    assert report["result"]["classification"] == "nontrivial"
    assert report["result"]["level"] == pytest.approx(4.0 / 3.0, rel=1e-2)
    assert (out / "solve_fields.csv").exists()
    assert (out / "solve_trace.csv").read_text(encoding="utf-8").startswith("iteration,level,residual\n")


@pytest.mark.slow
def test_reruns_are_byte_identical(write_config, tmp_path):
    config = str(write_config(SCALAR))
    assert main(["solve", "--config", config, "-o", str(tmp_path / "a")]) == EXIT_OK
    assert main(["solve", "--config", config, "-o", str(tmp_path / "b")]) == EXIT_OK
    for name in ("solve_report.yaml", "solve_fields.csv", "solve_trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_inadmissible_problem_exits_with_config_code(write_config, tmp_path, capsys):
    text = SCALAR.replace("  n: 1", "  n: 3").replace("  q: 2.0", "  q: 3.0")
    code = main(["solve", "--config", str(write_config(text)), "-o", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 2" in err
    assert "n/(n-2)" in err


def test_shipped_inadmissible_config_exits_with_config_code(tmp_path, capsys):
    config = Path(__file__).parent.parent / "configs" / "invalid_q3_n3.yaml"
    code = main(["solve", "--config", str(config), "-o", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 3" in err
    assert "n/(n-2)" in err


def test_missing_config_exits_with_config_code(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG


def test_non_convergence_exit_code(write_config, tmp_path):
    config = str(write_config(SCALAR))
    code = main(["solve", "--config", config, "-o", str(tmp_path / "out"), "--set", "solver.max_iter=2"])
    assert code == EXIT_NONCONVERGED


def test_audit_passes_and_fault_injection_fails(write_config, tmp_path):
    config = str(write_config(PAIR))
    assert main(["audit", "--config", config, "-o", str(tmp_path / "ok")]) == EXIT_OK
    rows = (tmp_path / "ok" / "audit_inequalities.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0] == "sample,kind,components,lhs,rhs,tolerance,slack,ok"
    assert all(line.endswith(",true") for line in rows[1:])

    code = main(
        ["audit", "--config", config, "-o", str(tmp_path / "bad"), "--set", "audit.inject_fault=true"]
    )
    assert code == EXIT_AUDIT
    rows = (tmp_path / "bad" / "audit_inequalities.csv").read_text(encoding="utf-8").splitlines()
    assert any(line.endswith(",false") for line in rows[1:])


WEAK_TRIPLE = """\
schema_version: 1
problem:
  n: 1
  q: 1.5
  lambda: [1.0, 2.0, 4.0]
  mu: [1.0, 1.0, 1.0]
  b: 1.0e-4
grid:
  R: 20.0
  M: 400
solver:
  multistart: 1
  max_iter: 3000
audit:
  samples: 1
  induction: true
"""


@pytest.mark.slow
def test_audit_with_semitrivial_best_subsystem_fails_checks(write_config, tmp_path):
    out = tmp_path / "out"
    code = main(["audit", "--config", str(write_config(WEAK_TRIPLE)), "-o", str(out)])
    assert code == EXIT_AUDIT
    report = yaml.safe_load((out / "audit_report.yaml").read_text(encoding="utf-8"))
    induction = report["induction"]
    assert induction["checks"]["base_nontrivial"] is False
    assert induction["construction"] is None
    assert induction["ok"] is False


@pytest.mark.slow
def test_invalid_bracket_exit_code(write_config, tmp_path):
    config = str(write_config(PAIR))
    out = tmp_path / "out"
    code = main(["threshold", "--config", config, "-o", str(out), "--set", "threshold.bracket=[0.01, 1.0]"])
    assert code == EXIT_BRACKET
    report = yaml.safe_load((out / "threshold_report.yaml").read_text(encoding="utf-8"))
    assert report["invalid_bracket"]["low"]["classification"] == "nontrivial"


def test_threshold_needs_two_components(write_config, tmp_path):
    code = main(["threshold", "--config", str(write_config(SCALAR)), "-o", str(tmp_path / "out")])
    assert code == EXIT_CONFIG


def test_unknown_command_is_rejected(write_config):
    with pytest.raises(SystemExit):
        main(["bogus", "--config", str(write_config(SCALAR))])


@pytest.mark.slow
def test_scalar_and_subsystem_levels(write_config, tmp_path):
    config = str(write_config(PAIR))
    out = tmp_path / "out"
    assert main(["scalar", "--config", config, "-o", str(out)]) == EXIT_OK
    levels = (out / "scalar_levels.csv").read_text(encoding="utf-8").splitlines()
    assert levels[0] == "component,lambda,mu,level,residual,converged,iterations"
    assert len(levels) == 3

    assert main(["subsystems", "--config", config, "-o", str(out)]) == EXIT_OK
    report = yaml.safe_load((out / "subsystems_report.yaml").read_text(encoding="utf-8"))
    assert list(report["subsystems"]) == ["1", "2"]


@pytest.mark.slow
def test_theta_search_finds_energy_drop(write_config, tmp_path):
    out = tmp_path / "out"
    assert main(["theta-search", "--config", str(write_config(PAIR)), "-o", str(out)]) == EXIT_OK
    report = yaml.safe_load((out / "theta_report.yaml").read_text(encoding="utf-8"))
    assert report["added_component"] == 2
    assert report["best"]["undercuts"] is True
    assert report["best"]["energy_new"] < report["base_level"]
    assert report["chain_consistent"] is True
    scan = (out / "theta_scan.csv").read_text(encoding="utf-8").splitlines()
    assert len(scan) == 62
