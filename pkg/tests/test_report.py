import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ac_estimates.equations import EquationSpec
from ac_estimates.geometry import WarpedGeometry
from ac_estimates.plotting import plot_kind, plot_profile
from ac_estimates.report import (
    PLOT_COLUMNS,
    PLOT_KINDS,
    ReportError,
    available_kinds,
    csv_text,
    dumps,
    emit_plot_data,
    format_cell,
    format_float,
    plot_rows,
    write_table,
)
from ac_estimates.solver import solve_ball
from ac_estimates.verify import check_identity, check_liouville


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_non_finite_and_cells():
    assert [format_float(v) for v in (math.nan, math.inf, -math.inf)] == ["NaN", "Infinity", "-Infinity"]
    assert format_cell(None) == "" and format_cell(True) == "true" and format_cell(np.int64(3)) == "3"
    assert format_cell({"b": 1, "a": 0.5}) == "a=0.5;b=1"


def test_dumps_is_sorted_and_parseable():
    text = dumps({"b": [1, 2.5, None], "a": {"z": True, "y": np.float64(0.1)}, "c": np.arange(2)})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {"a": {"y": 0.1, "z": True}, "b": [1, 2.5, None], "c": [0, 1]}
    assert json.loads(dumps({"x": math.nan}), parse_constant=lambda c: c) == {"x": "NaN"}
    with pytest.raises(ReportError):
        dumps({"x": object()})


def test_csv_and_tables(tmp_path):
    text = csv_text([{"a": 1, "b": 0.1}, {"a": 2}], ["a", "b"])
    assert list(csv.reader(io.StringIO(text))) == [["a", "b"], ["1", "0.10000000000000001"], ["2", ""]]
    with pytest.raises(ReportError):
        write_table(tmp_path / "empty.csv", [], ["a"])
    assert not (tmp_path / "empty.csv").exists()
    path = write_table(tmp_path / "t.json", [{"a": 1, "b": 2}], ["a"], "json")
    assert json.loads(path.read_text()) == [{"a": 1}]
    with pytest.raises(ReportError):
        write_table(tmp_path / "t.xml", [{"a": 1}], ["a"], "xml")


@pytest.fixture(scope="module")
def identity_payload():
    geo = WarpedGeometry.euclidean(2, 1.0)
    sol = solve_ball(geo, EquationSpec.allen_cahn(), 1.0, 0.5, nodes_per_unit=64)
    return {"config_hash": "abc", "identity": [check_identity(geo, sol, 0.5).to_dict()]}


@pytest.fixture(scope="module")
def liouville_payload():
    reports = check_liouville(WarpedGeometry.euclidean(2, 4.0), EquationSpec.allen_cahn(), [1.0, 2.0, 4.0],
                              [0.5], label="demo", nodes_per_unit=64)
    return {"config_hash": "abc", "liouville": [r.to_dict() for r in reports]}


def test_identity_order_rows(identity_payload):
    rows = plot_rows(identity_payload, "identity-order")
    assert len(rows) >= 3
    assert all(set(PLOT_COLUMNS["identity-order"]) <= set(r) for r in rows)
    hs = [r["h"] for r in rows]
    assert hs == sorted(hs, reverse=True)
    assert rows[0]["residual"] > rows[-1]["residual"]


def test_liouville_rows_are_monotone(liouville_payload):
    rows = plot_rows(liouville_payload, "liouville-convergence")
    devs = [r["deviation"] for r in sorted(rows, key=lambda r: r["R"])]
    assert len(devs) == 3 and all(a > b for a, b in zip(devs, devs[1:]))


def test_unknown_or_empty_kinds_raise(tmp_path, identity_payload):
    with pytest.raises(ReportError):
        plot_rows(identity_payload, "scatter")
    with pytest.raises(ReportError):
        plot_rows(identity_payload, "jflow-decay")
    with pytest.raises(ReportError):
        emit_plot_data(identity_payload, "bound-vs-R", tmp_path)
    assert not list(tmp_path.iterdir())
    assert available_kinds(identity_payload) == ["identity-order"]
    assert set(PLOT_KINDS) == set(PLOT_COLUMNS)


def test_emit_plot_data_tags_config_hash(tmp_path, liouville_payload):
    path = emit_plot_data(liouville_payload, "liouville-convergence", tmp_path)
    assert path.name == "plot-liouville-convergence.csv"
    rows = list(csv.DictReader(path.open()))
    assert rows and all(r["config_hash"] == "abc" for r in rows)
    jpath = emit_plot_data(liouville_payload, "liouville-convergence", tmp_path, "json")
    assert json.loads(jpath.read_text())[0]["config_hash"] == "abc"


def test_jflow_rows():
    payload = {"jflow": [{"convention": "multiplicative", "times": [0.0, 1.0], "min_J": [1.0, 0.5],
                          "max_J": [1.0, 1.0], "envelope": [1.0, 0.4]}]}
    rows = plot_rows(payload, "jflow-decay")
    assert {r["quantity"] for r in rows} == {"min_J", "max_J", "j_decay"} and len(rows) == 6


def test_figures_are_written_reproducibly(tmp_path, identity_payload):
    rows = plot_rows(identity_payload, "identity-order")
    a = plot_kind(rows, "identity-order", tmp_path / "a.png")
    b = plot_kind(rows, "identity-order", tmp_path / "b.png")
    assert a.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert a.read_bytes() == b.read_bytes()
    assert plot_profile([0, 1], [1, 2], tmp_path / "p.png").stat().st_size > 0
    with pytest.raises(ReportError):
        plot_kind([], "identity-order", tmp_path / "c.png")
    with pytest.raises(ReportError):
        plot_kind(rows, "scatter", tmp_path / "d.png")
