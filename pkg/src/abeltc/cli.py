"""Command-line interface: ``abeltc solve | bench | quad``.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bench, quadrature
from .errors import AbelError, NumericalError, ValidationError
from .expr import Var, as_function, differentiate, parse, to_text
from .linalg import DEFAULT_RANK_TOL
from .solver import Problem, solve

DEFAULT_GRID_POINTS = 101

_FIELDS = {
    "kind", "alpha", "a", "b", "z", "lambda", "n", "phi", "g", "exact",
    "force_quadrature", "quad_nodes", "grid_points", "rank_tol",
}
_REQUIRED = ("kind", "alpha", "a", "b", "phi", "g")


@dataclass(frozen=True)
class RunConfig:
    """A loaded config: the problem plus run settings."""

    problem: Problem
    n: tuple[int, ...] = bench.DEFAULT_N
    grid_points: int = DEFAULT_GRID_POINTS
    rank_tol: float = DEFAULT_RANK_TOL


def _number(data, key, default=None):
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(f"{key} must be a finite number, got {value!r}", key)
    return float(value)


def _integer(data, key, default=None):
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{key} must be an integer, got {value!r}", key)
    return value


def _expression(data, key, variable):
    text = data.get(key)
    if text is None:
        return None
    if not isinstance(text, str):
        raise ValidationError(f"{key} must be an expression string", key)
    try:
        return parse(text, variable)
    except ValidationError as exc:
        raise ValidationError(f"{key}: {exc}", key) from exc


def config_from_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(unknown)}", unknown[0])
    for key in _REQUIRED:
        if key not in data:
            raise ValidationError(f"missing required field {key!r}", key)

    kind = data["kind"]
    if kind not in ("first", "second"):
        raise ValidationError(f"kind must be 'first' or 'second', got {kind!r}", "kind")

    n = data.get("n", list(bench.DEFAULT_N))
    n_list = [n] if isinstance(n, int) and not isinstance(n, bool) else n
    if not isinstance(n_list, list) or not n_list or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in n_list
    ):
        raise ValidationError("n must be an integer or a non-empty list of integers", "n")

    force = data.get("force_quadrature", False)
    if not isinstance(force, bool):
        raise ValidationError("force_quadrature must be true or false", "force_quadrature")

    grid_points = _integer(data, "grid_points", DEFAULT_GRID_POINTS)
    if grid_points < 2:
        raise ValidationError("grid_points must be >= 2", "grid_points")
    rank_tol = _number(data, "rank_tol", DEFAULT_RANK_TOL)
    if not rank_tol > 0:
        raise ValidationError("rank_tol must be positive", "rank_tol")

    problem = Problem(
        kind=kind,
        alpha=_number(data, "alpha"),
        a=_number(data, "a"),
        b=_number(data, "b"),
        z=_number(data, "z"),
        lam=_number(data, "lambda", -1.0),
        phi=_expression(data, "phi", "t"),
        g=_expression(data, "g", "x"),
        exact=_expression(data, "exact", "x"),
        force_quadrature=force,
        quad_nodes=_integer(data, "quad_nodes"),
    )
    return RunConfig(problem, tuple(n_list), grid_points, rank_tol)


def load_config(path) -> RunConfig:
    """Read and validate a JSON problem config."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return config_from_dict(data)


def config_to_dict(config: RunConfig) -> dict:
    """Inverse of :func:`config_from_dict` (expression-valued g only)."""
    p = config.problem
    if callable(p.g):
        raise ValidationError("only expression-valued g can be serialized", "g")
    data = {
        "kind": p.kind,
        "alpha": p.alpha,
        "a": p.a,
        "b": p.b,
        "z": p.z,
        "lambda": p.lam,
        "n": list(config.n),
        "phi": to_text(p.phi),
        "g": to_text(p.g),
        "force_quadrature": p.force_quadrature,
        "grid_points": config.grid_points,
        "rank_tol": config.rank_tol,
    }
    if p.exact is not None:
        data["exact"] = to_text(p.exact)
    if p.quad_nodes is not None:
        data["quad_nodes"] = p.quad_nodes
    return data


# {{{ commands


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _n_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty degree list")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abeltc", description="Taylor-collocation solver for generalized Abel integral equations.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="solve one problem from a JSON config")
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--n", action="append", type=int, metavar="N", help="Taylor degree (repeatable)")
    p.add_argument("--output", choices=("text", "csv", "json"), default="text")
    p.add_argument("--out", metavar="PATH", help="write to file instead of stdout")
    p.add_argument("--rank-tol", type=float, default=None)

    p = sub.add_parser("bench", help="regenerate the error tables of the built-in examples")
    p.add_argument("--example", action="append", metavar="NAME", help="ex1..ex5 (repeatable; default all)")
    p.add_argument("--n", type=_n_list, default=None, metavar="N1,N2,...")
    p.add_argument("--output", choices=("text", "csv", "json"), default="text")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--grid-points", type=int, default=None,
                   help="evaluate on this many equispaced points instead of 0, 0.2, ..., 1")
    p.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)

    p = sub.add_parser("quad", help="print one moment integral int_a^x (t-z)^j (phi(x)-phi(t))^-alpha dt")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--phi", required=True, metavar="EXPR")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--z", type=float, default=0.0)
    p.add_argument("--force-quadrature", action="store_true")
    return parser


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_solve(args) -> str:
    config = load_config(args.config)
    problem = config.problem
    rank_tol = args.rank_tol if args.rank_tol is not None else config.rank_tol
    grid = np.linspace(problem.a, problem.b, config.grid_points)
    reports = []
    for n in args.n or config.n:
        sol = solve(problem, n, rank_tol=rank_tol)
        for note in sol.warnings:
            print(f"warning: n={n}: {note}", file=sys.stderr)
        reports.append(bench.build_report(Path(args.config).stem, problem, sol, grid))

    if args.output == "json":
        return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
    if args.output == "csv":
        return "".join(bench.render_table(r, "csv", footer=len(reports) > 1) for r in reports)

    parts = [bench.render_table(reports, "text")]
    for r in reports:
        coeffs = ", ".join(f"{c:.10g}" for c in r.coefficients)
        parts.append(
            f"n={r.n}: rank={r.rank} cond~{r.condition_estimate:.3g} "
            f"residual={r.residual_norm:.3g}\n  Phi^(j)(z) = [{coeffs}]\n"
        )
    return "\n".join(parts)


def _cmd_bench(args) -> str:
    cases = [bench.get_case(name) for name in args.example] if args.example else bench.builtin_problems()
    chunks = []
    payload = []
    for case in cases:
        grid = None
        if args.grid_points is not None:
            if args.grid_points < 2:
                raise ValidationError("--grid-points must be >= 2", "grid_points")
            grid = np.linspace(case.problem.a, case.problem.b, args.grid_points)
        n_list = args.n or list(case.default_n_list)
        reports = [bench.run_benchmark(case, n, grid=grid, rank_tol=args.rank_tol) for n in n_list]
        if args.output == "json":
            payload.extend(r.to_dict() for r in reports)
        elif args.output == "csv":
            chunks.extend(bench.render_table(r, "csv", footer=True) for r in reports)
        else:
            chunks.append(bench.render_table(reports, "text"))
    if args.output == "json":
        return json.dumps(payload, indent=2) + "\n"
    return ("" if args.output == "csv" else "\n").join(chunks)


def _cmd_quad(args) -> str:
    if not 0.0 < args.alpha < 1.0:
        raise ValidationError("alpha must be in (0,1)", "alpha")
    if args.x < args.a:
        raise ValidationError("need x >= a", "x")
    if args.j < 0:
        raise ValidationError("j must be non-negative", "j")
    phi = parse(args.phi, "t")
    m = args.m if args.m is not None else quadrature.default_node_count(args.j)
    spec = quadrature.SingularIntegralSpec(
        x=args.x, j=args.j, z=args.z, a=args.a, alpha=args.alpha,
        phi=as_function(phi, "t"),
        phi_prime=as_function(differentiate(phi, "t"), "t"),
        identity=phi == Var("t"),
    )
    value = quadrature.singular_integral(spec, m, force_quadrature=args.force_quadrature)
    return f"{value:.17g}\n"


_COMMANDS = {"solve": _cmd_solve, "bench": _cmd_bench, "quad": _cmd_quad}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    try:
        _emit(_COMMANDS[args.command](args), getattr(args, "out", None))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, AbelError, ArithmeticError, OSError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    return 0


# }}}


if __name__ == "__main__":
    sys.exit(main())
