import csv
import io
import json
import math

import numpy as np
import pytest

from abeltc.bench import (
    REPORT_GRID, BenchReport, ReportRow, builtin_problems, get_case, manufactured_g, render_table,
    run_benchmark,
)
from abeltc.errors import ValidationError
from abeltc.expr import Const, as_function, parse
from abeltc.solver import Problem

CROSS_CHECK_GRID = np.linspace(0.01, 1.0, 100)


def test_registry():
    cases = builtin_problems()
    assert [c.name for c in cases] == ["ex1", "ex2", "ex3", "ex4", "ex5"]
    for case in cases:
        p = case.problem
        assert p.exact is not None and case.published_g is not None
        assert (p.a, p.b, p.z) == (0.0, 1.0, 0.0)
        assert case.default_n_list == (5, 7, 9)
        assert case.report_grid == REPORT_GRID
    assert [c.problem.kind for c in cases] == ["first"] * 3 + ["second"] * 2
    assert all(c.problem.lam == -1.0 for c in cases[3:])


def test_example_1_and_3_definitions():
    ex1, ex3 = get_case("ex1").problem, get_case("ex3").problem
    assert ex1.alpha == 0.5 and ex1.phi == parse("t^2", "t") and ex1.exact == parse("pi*x^3", "x")
    assert ex3.alpha == 1 / 6 and ex3.phi == parse("exp(t)", "t") and ex3.exact == parse("exp(x)", "x")


def test_unknown_case():
    with pytest.raises(ValidationError, match="ex1"):
        get_case("ex9")


def test_manufactured_g_examples():
    assert f"{get_case('ex1').problem.g_fn(0.2):.6g}" == "0.0167552"
    assert get_case("ex4").problem.g_fn(1.0) == pytest.approx(1 + 16 / 15, rel=1e-13)
    base = Problem(kind="first", alpha=0.3, a=0.0, b=1.0, phi=parse("exp(t)", "t"), g=Const(0.0))
    g = manufactured_g(base, parse("0", "x"))
    np.testing.assert_array_equal(g(np.array([0.0, 0.5, 1.0])), 0.0)
    assert g(0.5) == 0.0


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3", "ex4", "ex5"])
def test_manufactured_g_matches_published_forcing(name):
    case = get_case(name)
    manufactured = case.problem.g_fn(CROSS_CHECK_GRID)
    published = as_function(case.published_g, "x")(CROSS_CHECK_GRID)
    rel = np.abs(manufactured - published) / np.abs(published)
    assert np.max(rel) <= 1e-10


@pytest.mark.parametrize("name, n, tol", [("ex1", 9, 1e-9), ("ex2", 9, 1e-7), ("ex5", 3, 1e-10)])
def test_run_benchmark_tolerances(name, n, tol):
    report = run_benchmark(get_case(name), n)
    assert report.n == n and report.case == name
    assert report.max_error <= tol
    assert [row.x for row in report.rows] == list(REPORT_GRID)


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3", "ex4", "ex5"])
def test_max_error_is_row_maximum(name):
    grid = np.linspace(0, 1, 101)
    for n in (3, 5, 7):
        report = run_benchmark(get_case(name), n, grid=grid)
        assert report.max_error == max(abs(r.exact - r.approx) for r in report.rows)
        assert all(r.abs_error == abs(r.exact - r.approx) for r in report.rows)
        assert report.timing >= 0.0


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3"])
def test_strict_decrease(name):
    errors = [run_benchmark(get_case(name), n).max_error for n in (5, 7, 9)]
    assert errors[0] > errors[1] > errors[2]


def test_table_1_values():
    # absolute errors printed for x = 0, 0.2, ..., 1
    e5 = ["0.000211964", "4.17215e-05", "4.84617e-06", "7.69255e-06", "8.44368e-06", "3.61083e-05"]
    e7 = [1.17775e-8, 8.60494e-10, 1.33074e-10, 7.99231e-11, 2.03972e-10, 1.60657e-9]
    case = get_case("ex1")
    assert [f"{r.abs_error:.6g}" for r in run_benchmark(case, 5).rows] == e5
    np.testing.assert_allclose([r.abs_error for r in run_benchmark(case, 7).rows], e7, rtol=2e-4)


def test_text_table():
    reports = [run_benchmark(get_case("ex1"), n) for n in (5, 7, 9)]
    text = render_table(reports, "text")
    lines = text.splitlines()
    header = [c.strip() for c in lines[1].split("|")]
    assert header == ["x", "exact", "e_5", "e_7", "e_9"]
    row = next(line for line in lines if line.strip().startswith("0.4 "))
    assert "0.201062" in row
    assert lines[-1].strip().startswith("max error")


def test_single_report_text_has_header():
    text = render_table(run_benchmark(get_case("ex4"), 3), "text")
    assert "x" in text.splitlines()[1] and "exact" in text.splitlines()[1]


def test_csv_output():
    report = run_benchmark(get_case("ex2"), 5, grid=np.linspace(0, 1, 11))
    text = render_table(report, "csv")
    rows = list(csv.reader(io.StringIO(text)))
    assert len(rows) == 11 + 1
    assert rows[0] == ["x", "exact", "approx", "abs_error"]
    # 17 significant digits round-trip exactly
    assert [float(r[2]) for r in rows[1:]] == [r.approx for r in report.rows]


def test_csv_footer():
    text = render_table(run_benchmark(get_case("ex1"), 7), "csv", footer=True)
    lines = text.splitlines()
    assert lines[0] == "# case=ex1 n=7"
    assert lines[-1].startswith("# max_error=")
    assert float(lines[-1].split("=")[1]) == run_benchmark(get_case("ex1"), 7).max_error


def test_json_output():
    report = run_benchmark(get_case("ex3"), 5)
    data = json.loads(render_table(report, "json"))
    assert data["case"] == "ex3" and data["n"] == 5
    assert data["max_error"] == report.max_error
    assert len(data["rows"]) == len(REPORT_GRID)
    assert set(data["diagnostics"]) == {"rank", "condition_estimate", "residual_norm"}
    many = json.loads(render_table([report, report], "json"))
    assert isinstance(many, list) and len(many) == 2


def test_report_without_exact():
    row = ReportRow(0.5, None, 1.25, None)
    report = BenchReport("custom", 3, (row,), None, 0.0, 4, math.inf, 0.0)
    assert list(csv.reader(io.StringIO(render_table(report, "csv")))) == [["x", "approx"], ["0.5", "1.25"]]
    assert json.loads(render_table(report, "json"))["diagnostics"]["condition_estimate"] is None
    assert "Phi_3" in render_table(report, "text")


def test_render_errors():
    with pytest.raises(ValidationError):
        render_table([], "text")
    with pytest.raises(ValidationError):
        render_table(run_benchmark(get_case("ex4"), 3), "xml")
