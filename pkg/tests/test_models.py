"""Tests for run-config parsing, overrides and admissibility errors."""

import textwrap
from pathlib import Path

import pytest

from groundstate.errors import AdmissibilityError, ConfigError
from groundstate.models import GridConfig, Params, load_run_config, parse_run_config

SCALAR = textwrap.dedent(
    """\
    schema_version: 1
    problem:
      n: 1
      q: 2.0
      lambda: [1.0]
      mu: [1.0]
    grid:
      R: 20.0
      M: 400
    """
)


def test_parse_minimal_config():
    config = parse_run_config(SCALAR)
    assert config.problem.d == 1
    assert config.problem.lam == [1.0]
    assert config.grid.M == 400
    assert config.solver.max_iter == 2000
    assert config.threshold.bracket is None


def test_scalar_coupling_expands_to_matrix():
    p = Params(n=1, q=1.5, lam=[1.0, 2.0, 3.0], mu=[1.0, 1.0, 1.0], b=0.25)
    assert p.b == [[0.0, 0.25, 0.25], [0.25, 0.0, 0.25], [0.25, 0.25, 0.0]]


def test_inadmissible_growth_points_at_problem_block():
    text = textwrap.dedent(
        """\
        schema_version: 1
        problem:
          n: 3
          q: 3.0
          lambda: [1.0, 1.0]
          mu: [1.0, 1.0]
          b: 0.5
        """
    )
    with pytest.raises(AdmissibilityError) as info:
        parse_run_config(text)
    assert info.value.line == 2
    assert "n/(n-2)" in str(info.value)
    assert str(info.value).startswith("line 2: ")


@pytest.mark.parametrize(
    "problem, fragment",
    [
        ("lambda: [1.0, -1.0]\n  mu: [1.0, 1.0]\n  b: 0.1", "lambda_i > 0"),
        ("lambda: [1.0, 1.0]\n  mu: [1.0, 1.0]\n  b: 0.0", "b_ij > 0"),
        ("lambda: [1.0, 1.0]\n  mu: [1.0, 1.0]\n  b: [[0, 0.1], [0.2, 0]]", "symmetric"),
        ("lambda: [1.0, 1.0]\n  mu: [1.0]\n  b: 0.1", "mu has 1 entries"),
    ],
)
def test_admissibility_messages(problem, fragment):
    text = f"schema_version: 1\nproblem:\n  n: 1\n  q: 1.5\n  {problem}\n"
    with pytest.raises(AdmissibilityError, match=fragment.replace("[", r"\[")):
        parse_run_config(text)


def test_q_must_exceed_one():
    with pytest.raises(ValueError, match="1 < q"):
        Params(n=1, q=1.0, lam=[1.0], mu=[1.0])


def test_grid_error_line_number():
    with pytest.raises(ConfigError) as info:
        parse_run_config(SCALAR.replace("M: 400", "M: 3"))
    assert not isinstance(info.value, AdmissibilityError)
    assert info.value.line == 9
    assert info.value.key == "grid.M"


@pytest.mark.parametrize(
    "block, key, line",
    [
        ("threshold:\n  bracket: [2.0, 0.5]\n", "threshold.bracket", 11),
        ("threshold:\n  bracket: [-1.0, 0.5]\n", "threshold.bracket", 11),
        ("threshold:\n  b_min: 5.0\n  b_max: 1.0\n", "threshold.b_max", 12),
        ("theta:\n  theta_min: 1.0\n  theta_max: 0.1\n", "theta.theta_max", 12),
    ],
)
def test_reversed_ranges_are_config_errors(block, key, line):
    with pytest.raises(ConfigError) as info:
        parse_run_config(SCALAR + block)
    assert not isinstance(info.value, AdmissibilityError)
    assert info.value.key == key
    assert info.value.line == line


def test_reversed_bracket_override_is_rejected():
    with pytest.raises(ConfigError) as info:
        parse_run_config(SCALAR, ["threshold.bracket=[1.0, 0.5]"])
    assert info.value.key == "threshold.bracket"
    assert "0 < b_lo < b_hi" in str(info.value)


def test_schema_version_is_checked():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_run_config(SCALAR.replace("schema_version: 1", "schema_version: 2"))


def test_malformed_yaml_reports_a_line():
    with pytest.raises(ConfigError) as info:
        parse_run_config("schema_version: 1\nproblem: [1, 2\n")
    assert info.value.line is not None


def test_top_level_must_be_a_mapping():
    with pytest.raises(ConfigError):
        parse_run_config("- 1\n- 2\n")


def test_overrides():
    config = parse_run_config(
        SCALAR, ["solver.max_iter=5", "threshold.bracket=[0.1, 2]", "output.prefix=run1_", "audit.samples=3"]
    )
    assert config.solver.max_iter == 5
    assert config.threshold.bracket == (0.1, 2.0)
    assert config.output.prefix == "run1_"
    assert config.audit.samples == 3


@pytest.mark.parametrize("override", ["solver.max_iter", "=3", "grid.M.x=3"])
def test_bad_overrides(override):
    with pytest.raises(ConfigError):
        parse_run_config(SCALAR, [override])


def test_override_can_make_problem_inadmissible():
    with pytest.raises(AdmissibilityError):
        parse_run_config(SCALAR, ["problem.q=0.5"])


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_run_config(tmp_path / "absent.yaml")


def test_load_from_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(SCALAR, encoding="utf-8")
    assert load_run_config(path).grid.R == 20.0


def test_default_radius_uses_smallest_lambda():
    p = Params(n=1, q=1.5, lam=[4.0, 16.0], mu=[1.0, 1.0], b=0.1)
    grid = GridConfig(M=100).build(p)
    assert grid.R == pytest.approx(10.0)
    assert GridConfig(R=7.0, M=100).build(p).R == 7.0


def test_restrict_and_permute():
    p = Params(n=2, q=1.5, lam=[1.0, 2.0, 3.0], mu=[1.0, 1.5, 2.0], b=[[0, 0.1, 0.2], [0.1, 0, 0.3], [0.2, 0.3, 0]])
    sub = p.restrict([2, 0])
    assert sub.lam == [3.0, 1.0]
    assert sub.b == [[0.0, 0.2], [0.2, 0.0]]
    assert p.permute([1, 0, 2]).mu == [1.5, 1.0, 2.0]
    with pytest.raises(ValueError):
        p.permute([0, 0, 1])
    assert p.with_coupling(0.5).b[0][2] == 0.5


CONFIG_DIR = Path(__file__).parent.parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    if path.stem.startswith("invalid"):
        with pytest.raises(AdmissibilityError):
            load_run_config(path)
    else:
        load_run_config(path)
