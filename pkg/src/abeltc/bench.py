"""The five reference problems and a harness that rebuilds their error tables.

Every registered problem uses a manufactured right-hand side: g is obtained
by applying the integral operator to the known exact solution with a
high-order rule. The closed-form g of each example is kept alongside
(``published_g``) so the two can be cross-checked.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import quadrature
from .errors import ValidationError
from .expr import Const, Expr, as_function, parse
from .linalg import DEFAULT_RANK_TOL
from .solver import Problem, TaylorSolution, evaluate_solution, solve

REPORT_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_N = (5, 7, 9)


@dataclass(frozen=True)
class BenchmarkCase:
    name: str
    problem: Problem
    default_n_list: tuple[int, ...] = DEFAULT_N
    report_grid: tuple[float, ...] = REPORT_GRID
    published_g: Expr | None = None
    description: str = ""


class ReportRow(NamedTuple):
    x: float
    exact: float | None
    approx: float
    abs_error: float | None


@dataclass(frozen=True, eq=False)
class BenchReport:
    case: str
    n: int
    rows: tuple[ReportRow, ...]
    max_error: float | None
    timing: float
    rank: int
    condition_estimate: float
    residual_norm: float
    coefficients: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        def num(v):
            return v if v is None or math.isfinite(v) else None

        return {
            "case": self.case,
            "n": self.n,
            "rows": [row._asdict() for row in self.rows],
            "max_error": self.max_error,
            "timing": self.timing,
            "diagnostics": {
                "rank": self.rank,
                "condition_estimate": num(self.condition_estimate),
                "residual_norm": self.residual_norm,
            },
            "coefficients": list(self.coefficients),
        }


def manufactured_g(problem: Problem, exact: Expr, m: int = quadrature.MANUFACTURED_NODES) -> Callable:
    """Right-hand side for which ``exact`` solves ``problem`` (whose own g is ignored)."""
    exact_fn = as_function(exact, "x")

    def integral(x: float) -> float:
        return quadrature.apply_kernel(
            exact_fn, x, problem.a, problem.alpha, problem.phi_fn, problem.phi_prime, m
        )

    def g(x):
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        values = np.array([integral(float(v)) for v in xs])
        if problem.kind == "second":
            values = np.broadcast_to(exact_fn(xs), xs.shape) - problem.lam * values
        return float(values[0]) if np.ndim(x) == 0 else values

    return g


def _case(name, kind, alpha, phi, exact, published_g, description, lam=-1.0) -> BenchmarkCase:
    exact_expr = parse(exact, "x")
    base = Problem(
        kind=kind, alpha=alpha, a=0.0, b=1.0, phi=parse(phi, "t"), g=Const(0.0),
        lam=lam, exact=exact_expr,
    )
    problem = replace(base, g=manufactured_g(base, exact_expr))
    return BenchmarkCase(
        name=name,
        problem=problem,
        published_g=parse(published_g, "x"),
        description=description,
    )


@lru_cache(maxsize=None)
def _registry() -> tuple[BenchmarkCase, ...]:
    return (
        _case("ex1", "first", 0.5, "t^2", "pi*x^3", "2/3*pi*x^3",
              "first kind, kernel (x^2 - t^2)^(-1/2)"),
        _case("ex2", "first", 0.25, "sin(t)", "cos(x)", "4/3*sin(x)^(3/4)",
              "first kind, kernel (sin x - sin t)^(-1/4)"),
        _case("ex3", "first", 1 / 6, "exp(t)", "exp(x)", "6/5*(exp(x)-1)^(5/6)",
              "first kind, kernel (e^x - e^t)^(-1/6)"),
        _case("ex4", "second", 0.5, "t", "x^2", "x^2 + 16/15*x^(5/2)",
              "second kind, kernel (x - t)^(-1/2), minus sign"),
        _case("ex5", "second", 0.25, "t", "1-2*x", "1 - 2*x - 32/21*x^(7/4) + 4/3*x^(3/4)",
              "second kind, kernel (x - t)^(-1/4), minus sign"),
    )


def builtin_problems() -> list[BenchmarkCase]:
    return list(_registry())


def get_case(name: str) -> BenchmarkCase:
    for case in _registry():
        if case.name == name:
            return case
    known = ", ".join(c.name for c in _registry())
    raise ValidationError(f"unknown example {name!r} (known: {known})", "example")


def build_report(name: str, problem: Problem, sol: TaylorSolution, grid, timing: float = 0.0) -> BenchReport:
    grid = np.asarray(grid, dtype=np.float64)
    approx = np.broadcast_to(evaluate_solution(sol, grid), grid.shape)
    if problem.exact_fn is not None:
        exact = np.broadcast_to(problem.exact_fn(grid), grid.shape)
        errors = np.abs(exact - approx)
        rows = tuple(
            ReportRow(float(x), float(e), float(p), float(err))
            for x, e, p, err in zip(grid, exact, approx, errors)
        )
        max_error = max(row.abs_error for row in rows)
    else:
        rows = tuple(ReportRow(float(x), None, float(p), None) for x, p in zip(grid, approx))
        max_error = None
    return BenchReport(
        case=name,
        n=sol.n,
        rows=rows,
        max_error=max_error,
        timing=timing,
        rank=sol.rank,
        condition_estimate=sol.condition_estimate,
        residual_norm=sol.residual_norm,
        coefficients=tuple(float(c) for c in sol.coefficients),
    )


def run_benchmark(
    case: BenchmarkCase,
    n: int,
    grid: Sequence[float] | None = None,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> BenchReport:
    """Solve ``case`` at degree n and tabulate errors on ``grid``
    (default: the case's report grid)."""
    start = time.perf_counter()
    sol = solve(case.problem, n, rank_tol=rank_tol)
    timing = time.perf_counter() - start
    return build_report(case.name, case.problem, sol, case.report_grid if grid is None else grid, timing)


# {{{ rendering


def _g17(v) -> str:
    return "" if v is None else f"{v:.17g}"


def _g6(v) -> str:
    return "-" if v is None else f"{v:.6g}"


def _text_table(reports: Sequence[BenchReport]) -> str:
    first = reports[0]
    has_exact = first.max_error is not None
    header = ["x", "exact"] + [f"e_{r.n}" if has_exact else f"Phi_{r.n}" for r in reports]
    body = []
    for i, row in enumerate(first.rows):
        cells = [_g6(row.x), _g6(row.exact)]
        for r in reports:
            cells.append(_g6(r.rows[i].abs_error if has_exact else r.rows[i].approx))
        body.append(cells)
    footer = ["max error", ""] + [_g6(r.max_error) for r in reports]

    widths = [max(len(line[k]) for line in [header, *body, footer]) for k in range(len(header))]

    def fmt(cells):
        return " | ".join(c.rjust(w) for c, w in zip(cells, widths))

    rule = "-+-".join("-" * w for w in widths)
    lines = [f"{first.case}", fmt(header), rule, *map(fmt, body), rule, fmt(footer)]
    return "\n".join(lines) + "\n"


def render_table(report: BenchReport | Sequence[BenchReport], format: str = "text", footer: bool = False) -> str:
    """Render one report, or several for the same case and grid.

    ``text`` lays several reports side by side, one error column per n, with
    a max-error footer. ``csv`` writes header + one line per grid point
    (``footer=True`` appends a ``# max_error=...`` comment line). ``json``
    writes an object per report.
    """
    reports = [report] if isinstance(report, BenchReport) else list(report)
    if not reports:
        raise ValidationError("nothing to render")

    if format == "text":
        return _text_table(reports)
    if format == "json":
        data = [r.to_dict() for r in reports]
        return json.dumps(data[0] if isinstance(report, BenchReport) else data, indent=2) + "\n"
    if format != "csv":
        raise ValidationError(f"unknown output format {format!r}", "output")

    out = io.StringIO()
    for r in reports:
        writer = csv.writer(out, lineterminator="\n")
        has_exact = r.max_error is not None
        if len(reports) > 1 or footer:
            out.write(f"# case={r.case} n={r.n}\n")
        if has_exact:
            writer.writerow(["x", "exact", "approx", "abs_error"])
            writer.writerows([_g17(row.x), _g17(row.exact), _g17(row.approx), _g17(row.abs_error)]
                             for row in r.rows)
        else:
            writer.writerow(["x", "approx"])
            writer.writerows([_g17(row.x), _g17(row.approx)] for row in r.rows)
        if footer and has_exact:
            out.write(f"# max_error={_g17(r.max_error)}\n")
    return out.getvalue()


# }}}
