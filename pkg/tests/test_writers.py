"""Tests for CSV and YAML output."""

import numpy as np
import pytest
import yaml

from groundstate.energy import FieldVector
from groundstate.errors import GridMismatchError
from groundstate.radial import RadialField, RadialGrid
from groundstate.writers import (
    atomic_write_text,
    format_value,
    read_fields_csv,
    render_report,
    write_fields_csv,
    write_report,
    write_rows_csv,
)


@pytest.fixture
def small_grid():
    return RadialGrid(n=2, R=5.0, M=20)


@pytest.mark.parametrize(
    "value, expected",
    [
        (True, "true"),
        (np.bool_(False), "false"),
        (0.1, "0.10000000000000001"),
        (np.float64(1.5), "1.5"),
        (np.int64(7), "7"),
        ([1, 2.5], "1;2.5"),
        ("nontrivial", "nontrivial"),
    ],
)
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_fields_round_trip_is_exact(tmp_path, small_grid):
    u = FieldVector(
        (
            RadialField.from_function(small_grid, lambda r: np.exp(-r) / 3.0),
            RadialField.from_function(small_grid, lambda r: np.cos(r) * (5.0 - r)),
        )
    )
    path = write_fields_csv(tmp_path / "fields.csv", u)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "r,u1,u2"
    back = read_fields_csv(path, small_grid)
    np.testing.assert_array_equal(back.as_array(), u.as_array())


def test_fields_on_other_grid_are_rejected(tmp_path, small_grid):
    u = FieldVector((RadialField.from_function(small_grid, lambda r: np.exp(-r)),))
    path = write_fields_csv(tmp_path / "fields.csv", u)
    with pytest.raises(GridMismatchError):
        read_fields_csv(path, RadialGrid(n=2, R=6.0, M=20))


def test_rows_are_byte_identical_across_writes(tmp_path):
    rows = [[1, 0.1, "a", True], [2, 1e-300, "b", False]]
    first = write_rows_csv(tmp_path / "a.csv", ["k", "x", "name", "ok"], rows).read_bytes()
    second = write_rows_csv(tmp_path / "b.csv", ["k", "x", "name", "ok"], rows).read_bytes()
    assert first == second
    assert first.endswith(b"\n") and b"\r" not in first


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "nested" / "out.txt"
    atomic_write_text(target, "one")
    atomic_write_text(target, "two")
    assert target.read_text(encoding="utf-8") == "two"
    assert [p.name for p in target.parent.iterdir()] == ["out.txt"]


def test_report_layout(tmp_path):
    body = {"result": {"level": np.float64(1.25), "converged": np.bool_(True), "components": (1, 2)}}
    text = render_report("solve", body, params={"n": 1})
    assert text.splitlines()[0] == "report: solve"
    document = yaml.safe_load(text)
    assert list(document) == ["report", "schema_version", "problem", "result"]
    assert document["result"] == {"level": 1.25, "converged": True, "components": [1, 2]}

    path = write_report(tmp_path / "report.yaml", "solve", body)
    assert "problem" not in yaml.safe_load(path.read_text(encoding="utf-8"))


def test_timestamp_is_opt_in():
    assert "written" not in yaml.safe_load(render_report("audit", {}))
    assert "written" in yaml.safe_load(render_report("audit", {}, timestamp=True))
