"""Taylor-collocation solver for generalized Abel equations.

First kind:   int_a^x Phi(t) / (phi(x) - phi(t))^alpha dt = g(x)
Second kind:  Phi(x) - lam * int_a^x Phi(t) / (phi(x) - phi(t))^alpha dt = g(x)

The unknown is approximated by its degree-n Taylor polynomial about z,
Phi_n(x) = sum_j c_j / j! (x - z)^j, and the c_j = Phi^(j)(z) are fixed by
collocating at n + 1 equispaced nodes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np

from . import quadrature
from .errors import ValidationError
from .expr import EvaluationError, Expr, Var, as_function, differentiate, evaluate, free_variables
from .linalg import DEFAULT_RANK_TOL, solve_min_norm_ls

MAX_DEGREE = 30
CONDITION_WARNING = 1e12
MONOTONICITY_SAMPLES = 257
BOUND_SAMPLES = 1001

Forcing = Union[Expr, Callable]


@dataclass(frozen=True)
class Problem:
    """One Abel equation instance.

    ``lam`` is the coefficient in front of the integral for the second kind
    (+1 for ``Phi = g + int``, -1 for ``Phi = g - int``); it is ignored for
    the first kind. ``g`` is usually an expression in ``x`` but any
    vectorized callable is accepted (manufactured forcing terms).
    """

    kind: str
    alpha: float
    a: float
    b: float
    phi: Expr
    g: Forcing
    z: float | None = None
    lam: float = -1.0
    exact: Expr | None = None
    force_quadrature: bool = False
    quad_nodes: int | None = None

    def __post_init__(self):
        if self.kind not in ("first", "second"):
            raise ValidationError(f"kind must be 'first' or 'second', got {self.kind!r}", "kind")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must be in (0,1)", "alpha")
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValidationError(f"need finite a < b, got a={self.a!r}, b={self.b!r}", "a")
        if self.z is None:
            object.__setattr__(self, "z", self.a)
        if not self.a <= self.z <= self.b:
            raise ValidationError(f"z={self.z!r} is outside [a, b]", "z")
        if not math.isfinite(self.lam):
            raise ValidationError("lambda must be finite", "lambda")
        if self.quad_nodes is not None and not 4 <= self.quad_nodes <= quadrature.MAX_NODES:
            raise ValidationError(
                f"quad_nodes must be in [4, {quadrature.MAX_NODES}]", "quad_nodes"
            )

        _check_variables(self.phi, "t", "phi")
        if not callable(self.g):
            _check_variables(self.g, "x", "g")
        if self.exact is not None:
            _check_variables(self.exact, "x", "exact")
        self._check_monotone()

    def _check_monotone(self):
        samples = np.linspace(self.a, self.b, MONOTONICITY_SAMPLES)
        try:
            slope = np.broadcast_to(self.phi_prime(samples), samples.shape)
        except EvaluationError as exc:
            raise ValidationError(f"phi' cannot be evaluated on [a, b]: {exc}", "phi") from exc
        # strict inside (a, b); the endpoints may be stationary (phi = t^2 at 0)
        bad = np.flatnonzero((slope < 0.0) | ((slope == 0.0) & (samples > self.a) & (samples < self.b)))
        if bad.size:
            t = samples[bad[0]]
            raise ValidationError(
                f"phi must be strictly increasing on [a, b]: phi'({t:.6g}) = {slope[bad[0]]:.6g}",
                "phi",
            )

    @cached_property
    def phi_prime_expr(self) -> Expr:
        return differentiate(self.phi, "t")

    @cached_property
    def phi_fn(self) -> Callable:
        return as_function(self.phi, "t")

    @cached_property
    def phi_prime(self) -> Callable:
        return as_function(self.phi_prime_expr, "t")

    @cached_property
    def g_fn(self) -> Callable:
        return self.g if callable(self.g) else as_function(self.g, "x")

    @cached_property
    def exact_fn(self) -> Callable | None:
        return None if self.exact is None else as_function(self.exact, "x")

    @property
    def closed_form(self) -> bool:
        """Moments use the exact formula (phi is the bare variable t)."""
        return self.phi == Var("t") and not self.force_quadrature

    def node_count(self, n: int) -> int:
        return self.quad_nodes if self.quad_nodes is not None else quadrature.default_node_count(n)

    def moments(self, x: float, n: int, m: int) -> np.ndarray:
        return quadrature.moments(
            x, n, self.z, self.a, self.alpha, self.phi_fn, self.phi_prime, m,
            identity=self.closed_form,
        )


def _check_variables(node: Expr, allowed: str, name: str):
    extra = free_variables(node) - {allowed}
    if extra:
        raise ValidationError(
            f"{name} may only use the variable {allowed!r}, found {', '.join(sorted(extra))}",
            name,
        )


@dataclass(frozen=True, eq=False)
class TaylorSolution:
    """c_j = Phi^(j)(z), j = 0..n, plus solve diagnostics."""

    z: float
    n: int
    coefficients: np.ndarray
    rank: int
    residual_norm: float
    condition_estimate: float
    warnings: tuple[str, ...] = field(default=())

    def __call__(self, x):
        return evaluate_solution(self, x)

    def polynomial_coefficients(self) -> np.ndarray:
        """Coefficients of (x - z)^j, i.e. c_j / j!."""
        return self.coefficients / _factorials(self.n)


def _factorials(n: int) -> np.ndarray:
    return np.array([math.factorial(j) for j in range(n + 1)], dtype=np.float64)


def collocation_points(a: float, b: float, n: int) -> np.ndarray:
    if n < 1:
        raise ValidationError(f"degree n must be >= 1, got {n}")
    if not a < b:
        raise ValidationError(f"need a < b, got a={a!r}, b={b!r}")
    points = a + (b - a) * np.arange(n + 1) / n
    points[0], points[-1] = a, b
    return points


def _check_degree(n: int, max_degree: int):
    if max_degree > MAX_DEGREE:
        warnings.warn(
            f"degree cap raised to {max_degree}; monomial conditioning degrades past {MAX_DEGREE}",
            stacklevel=3,
        )
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= max_degree:
        raise ValidationError(f"degree n must be an integer in [1, {max_degree}], got {n!r}", "n")


def assemble(problem: Problem, n: int, m: int | None = None, max_degree: int = MAX_DEGREE):
    """Collocation matrix and right-hand side, both of size n + 1.

    A[i, j] = I(x_i, j) / j!, G[i] = g(x_i). The first kind returns (A, G),
    the second kind (B - lam * A, G) with B[i, j] = (x_i - z)^j / j!.
    """
    _check_degree(n, max_degree)
    if m is None:
        m = problem.node_count(n)
    xs = collocation_points(problem.a, problem.b, n)
    fact = _factorials(n)

    a_mat = np.empty((n + 1, n + 1))
    for i, x in enumerate(xs):
        a_mat[i] = problem.moments(float(x), n, m) / fact
    rhs = np.asarray(np.broadcast_to(problem.g_fn(xs), xs.shape), dtype=np.float64)

    if problem.kind == "first":
        return a_mat, rhs
    b_mat = (xs - problem.z)[:, None] ** np.arange(n + 1)[None, :] / fact
    return b_mat - problem.lam * a_mat, rhs


def solve(
    problem: Problem,
    n: int,
    rank_tol: float = DEFAULT_RANK_TOL,
    m: int | None = None,
    max_degree: int = MAX_DEGREE,
) -> TaylorSolution:
    matrix, rhs = assemble(problem, n, m=m, max_degree=max_degree)
    ls = solve_min_norm_ls(matrix, rhs, rank_tol)

    notes = []
    if ls.condition_estimate > CONDITION_WARNING:
        notes.append(f"condition estimate {ls.condition_estimate:.3g} exceeds {CONDITION_WARNING:g}")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    return TaylorSolution(
        z=problem.z,
        n=n,
        coefficients=ls.x,
        rank=ls.rank,
        residual_norm=ls.residual_norm,
        condition_estimate=ls.condition_estimate,
        warnings=tuple(notes),
    )


def evaluate_solution(sol: TaylorSolution, x):
    """Horner evaluation of sum_j c_j / j! (x - z)^j."""
    h = np.asarray(x, dtype=np.float64) - sol.z
    coeffs = sol.polynomial_coefficients()
    value = np.full_like(h, coeffs[-1])
    for c in coeffs[-2::-1]:
        value = value * h + c
    return float(value) if value.ndim == 0 else value


def residual(problem: Problem, sol: TaylorSolution, grid, m: int = quadrature.RESIDUAL_NODES) -> np.ndarray:
    """Signed defect LHS - RHS of the original equation at each grid point."""
    grid = np.asarray(grid, dtype=np.float64)
    if np.any(grid < problem.a) or np.any(grid > problem.b):
        raise ValidationError("residual grid must lie in [a, b]")
    coeffs = sol.polynomial_coefficients()
    integral = np.array([problem.moments(float(x), sol.n, m) @ coeffs for x in grid])
    g = np.broadcast_to(problem.g_fn(grid), grid.shape)
    if problem.kind == "first":
        return integral - g
    return evaluate_solution(sol, grid) - problem.lam * integral - g


@dataclass(frozen=True)
class ErrorBoundInputs:
    """``deriv_bound``: sup over [a, b] of |Phi^(n+1)|.
    ``coeff_errors``: |Phi^(i)(z) - c_i| for i = 0..n."""

    deriv_bound: float
    coeff_errors: tuple[float, ...]

    def __post_init__(self):
        if self.deriv_bound < 0 or any(e < 0 for e in self.coeff_errors):
            raise ValidationError("error bound inputs must be non-negative")


def error_bound(sol: TaylorSolution, inputs: ErrorBoundInputs, a: float, b: float) -> float:
    """A-priori style bound on max |Phi - Phi_n| over [a, b].

    M / (n+1)! * deriv_bound + C * max_i e_i, with M = max |x - z|^(n+1) and
    C = max_x sum_i |x - z|^i / i!, both over a 1001-point grid.
    """
    n = sol.n
    h = np.abs(np.linspace(a, b, BOUND_SAMPLES) - sol.z)
    big_m = float(np.max(h ** (n + 1)))
    powers = h[None, :] ** np.arange(n + 1)[:, None] / _factorials(n)[:, None]
    big_c = float(np.max(powers.sum(axis=0)))
    max_e = max(inputs.coeff_errors, default=0.0)
    return big_m / math.factorial(n + 1) * inputs.deriv_bound + big_c * max_e


def exact_error_inputs(problem: Problem, sol: TaylorSolution) -> ErrorBoundInputs:
    """Error-bound inputs computed from the problem's exact solution by
    repeated symbolic differentiation. deriv_bound is sampled on the
    1001-point grid."""
    if problem.exact is None:
        raise ValidationError("problem has no exact solution")
    node = problem.exact
    errors = []
    for i in range(sol.n + 1):
        errors.append(abs(evaluate(node, {"x": sol.z}) - float(sol.coefficients[i])))
        node = differentiate(node, "x")
    samples = np.linspace(problem.a, problem.b, BOUND_SAMPLES)
    deriv = np.broadcast_to(evaluate(node, {"x": samples}), samples.shape)
    return ErrorBoundInputs(float(np.max(np.abs(deriv))), tuple(errors))
