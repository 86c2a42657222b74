import math
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dqptbattery import SweepResult, build_plan, run_sweep
from dqptbattery.errors import MissingColumn, TooFewRows
from dqptbattery.svg import nice_ticks, render_svg
from dqptbattery.tables import format_float, parse_csv, parse_json, read_table, to_csv, to_json, write_table


def test_csv_formatting_example(tmp_path):
    path = write_table(SweepResult(("x",), np.array([[0.5]]), {}), "csv", tmp_path / "t.csv")
    assert path.read_bytes() == b"x\n5.0000000000000000e-1\n"


def test_header_only_csv():
    assert to_csv(SweepResult(("gf", "t"), np.empty((0, 2)), {})) == "gf,t\n"
    back = parse_csv("gf,t\n")
    assert back.columns == ("gf", "t") and back.rows.shape == (0, 2)


@pytest.mark.parametrize("x", [0.0, -0.0, 1.0, 1 / 3, 5e-324, 1.7976931348623157e308, -2.5e-17, 123456789.123])
def test_format_float_round_trips(x):
    text = format_float(x)
    assert float(text) == x and math.copysign(1, float(text)) == math.copysign(1, x)
    assert re.fullmatch(r"-?\d\.\d{16}e-?\d+", text)


def test_special_values():
    result = SweepResult(("a", "b", "c"), np.array([[math.nan, math.inf, -math.inf]]), {})
    csv_back = parse_csv(to_csv(result))
    json_back = parse_json(to_json(result))
    for back in (csv_back, json_back):
        assert math.isnan(back.rows[0, 0]) and back.rows[0, 1] == math.inf and back.rows[0, 2] == -math.inf


finite = st.floats(allow_nan=False, allow_infinity=False)
tables = st.integers(1, 5).flatmap(
    lambda ncol: st.tuples(
        st.lists(st.from_regex(r"[a-z_][a-z0-9_]{0,6}", fullmatch=True), min_size=ncol, max_size=ncol, unique=True),
        st.lists(st.lists(finite, min_size=ncol, max_size=ncol), max_size=8),
    )
)


@given(tables)
def test_csv_round_trip(table):
    cols, rows = table
    result = SweepResult(tuple(cols), np.array(rows, dtype=float).reshape(len(rows), len(cols)), {})
    back = parse_csv(to_csv(result))
    assert back.columns == result.columns
    assert back.rows.tobytes() == result.rows.tobytes()


@given(tables)
def test_json_round_trip(table):
    cols, rows = table
    result = SweepResult(tuple(cols), np.array(rows, dtype=float).reshape(len(rows), len(cols)), {"note": "x"})
    back = parse_json(to_json(result))
    assert back.columns == result.columns and back.meta == {"note": "x"}
    assert back.rows.tobytes() == result.rows.tobytes()


def test_json_written_file_and_timing(tmp_path):
    result = SweepResult(("a",), np.array([[1.0], [2.0]]), {"wall_time": 0.3, "version": "v"})
    path = write_table(result, "json", tmp_path / "r.json")
    back = read_table(path)
    assert "wall_time" not in back.meta and back.rows.tobytes() == result.rows.tobytes()
    assert "wall_time" in read_table(write_table(result, "json", tmp_path / "s.json", include_timing=True)).meta
    with pytest.raises(ValueError):
        write_table(result, "xml", tmp_path / "r.xml")


@pytest.fixture(scope="module")
def evolve_table():
    plan = build_plan({"axis": {"values": [0.5, 1.3, 2.0]}, "time": {"t1": 4, "nt": 41}, "observables": ["e_density"]})
    return run_sweep(plan)


def test_svg_one_polyline_per_group(tmp_path, evolve_table):
    path = render_svg(evolve_table, "t", ["e_density"], tmp_path / "a.svg", group_col="gf")
    text = path.read_text()
    assert text.count("<polyline") == 3
    assert text.startswith("<?xml") and text.rstrip().endswith("</svg>")
    assert "gf=1.3" in text


def test_svg_multiple_columns(tmp_path):
    rows = np.column_stack([np.arange(5.0), np.arange(5.0) ** 2, -np.arange(5.0)])
    text = render_svg(SweepResult(("x", "y", "z"), rows, {}), "x", ["y", "z"], tmp_path / "b.svg").read_text()
    assert text.count("<polyline") == 2


def test_svg_non_finite_breaks_line(tmp_path):
    rows = np.column_stack([np.arange(6.0), [0, 1, np.nan, 3, 4, 5]])
    text = render_svg(SweepResult(("x", "y"), rows, {}), "x", "y", tmp_path / "c.svg").read_text()
    assert text.count("<polyline") == 2


def test_svg_errors(tmp_path, evolve_table):
    with pytest.raises(MissingColumn):
        render_svg(evolve_table, "time", ["e_density"], tmp_path / "d.svg")
    with pytest.raises(MissingColumn):
        render_svg(evolve_table, "t", ["power"], tmp_path / "d.svg")
    with pytest.raises(TooFewRows):
        render_svg(SweepResult(("x", "y"), np.array([[1.0, 2.0]]), {}), "x", ["y"], tmp_path / "d.svg")


def test_svg_deterministic(tmp_path, evolve_table):
    a = render_svg(evolve_table, "t", ["e_density"], tmp_path / "1.svg", group_col="gf", title="run")
    b = render_svg(evolve_table, "t", ["e_density"], tmp_path / "2.svg", group_col="gf", title="run")
    assert a.read_bytes() == b.read_bytes()


def test_nice_ticks():
    assert nice_ticks(0, 1) == pytest.approx([0, 0.2, 0.4, 0.6, 0.8, 1.0])
    assert nice_ticks(0, 8) == [0, 2, 4, 6, 8]
    assert nice_ticks(math.nan, 1) == []
