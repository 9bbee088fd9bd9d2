import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlsground import reporting
from nlsground.grid import GridMismatchError, build_grid
from nlsground.minimizer import FlowConfig, Verdict, minimize_on_sphere


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(reporting.fmt_float(x)) == x


def test_non_finite_floats_become_strings():
    doc = json.loads(reporting.dumps({"a": math.nan, "b": math.inf, "c": -math.inf}, "t"))
    assert (doc["a"], doc["b"], doc["c"]) == ("NaN", "Infinity", "-Infinity")


def test_dumps_is_valid_sorted_and_tagged():
    text = reporting.dumps({"z": [1.0, 2.5], "a": {"y": True, "x": None}, "v": Verdict.CONVERGED,
                            "n": np.int64(3), "f": np.float64(0.1)}, "demo")
    doc = json.loads(text)
    assert doc["schema_version"] == reporting.SCHEMA_VERSION and doc["report"] == "demo"
    assert doc["v"] == "Converged" and doc["n"] == 3 and doc["f"] == 0.1
    assert list(doc) == sorted(doc)
    assert text.endswith("}\n")


def test_dumps_is_deterministic():
    payload = {"b": [1 / 3, 2 / 3], "a": {"k": [{"x": 1e-300}]}}
    assert reporting.dumps(payload, "t") == reporting.dumps(dict(reversed(payload.items())), "t")


def test_unknown_types_rejected():
    with pytest.raises(TypeError):
        reporting.dumps({"x": object()}, "t")


def test_profile_csv_round_trip_is_bit_exact(tmp_path):
    g = build_grid(3, 10, 300)
    u = np.exp(-g.r ** 2 / 7) / 3
    path = reporting.write_profile_csv(tmp_path / "p.csv", g, u)
    np.testing.assert_array_equal(reporting.read_profile_csv(path, g), u)
    assert path.read_text().splitlines()[0] == "r,value"


def test_profile_csv_grid_checks(tmp_path):
    g = build_grid(3, 10, 300)
    path = reporting.write_profile_csv(tmp_path / "p.csv", g, np.zeros(g.M))
    with pytest.raises(GridMismatchError):
        reporting.read_profile_csv(path, build_grid(3, 10, 301))
    with pytest.raises(GridMismatchError):
        reporting.read_profile_csv(path, build_grid(3, 11, 300))
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,1\n")
    with pytest.raises(ValueError):
        reporting.read_profile_csv(bad, g)


@pytest.mark.filterwarnings("ignore::nlsground.grid.TruncationWarning")
def test_saved_profile_restarts_the_flow(tmp_path, qq):
    g = build_grid(3, 40, 1000)
    first = minimize_on_sphere(g, qq, 30.0, FlowConfig(residual_tol=1e-9))
    path = reporting.write_profile_csv(tmp_path / "gs.csv", g, first.u.values)
    again = minimize_on_sphere(g, qq, 30.0, FlowConfig(residual_tol=1e-9, init_profile="file",
                                                       init_path=str(path)))
    assert again.converged and again.iterations <= 1
    assert again.diagnostics.j_value == pytest.approx(first.diagnostics.j_value, rel=1e-12)


def test_csv_writers(tmp_path):
    g = build_grid(3, 5, 20)
    psi = np.exp(-g.r ** 2) * (1 + 1j)
    p = reporting.write_trajectory_csv(tmp_path / "t.csv", g, [0.0, 0.5], [psi, 2 * psi])
    lines = p.read_text().splitlines()
    assert lines[0] == "t,r,re,im" and len(lines) == 1 + 2 * g.M
    assert [float(v) for v in lines[g.M + 1].split(",")] == [0.5, 0.0, 2.0, 2.0]


def test_ensure_dir_creates_nested(tmp_path):
    d = reporting.ensure_dir(tmp_path / "a" / "b")
    assert d.is_dir()
