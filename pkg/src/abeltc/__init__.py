"""Taylor-collocation solver for generalized Abel integral equations of the
first and second kinds."""

from .bench import BenchmarkCase, BenchReport, builtin_problems, manufactured_g, render_table, run_benchmark
from .errors import AbelError, NumericalError, ValidationError
from .expr import differentiate, evaluate, parse, to_text
from .linalg import LsSolution, solve_min_norm_ls
from .quadrature import jacobi_rule, singular_integral, singular_integral_identity_phi
from .solver import (
    ErrorBoundInputs,
    Problem,
    TaylorSolution,
    assemble,
    collocation_points,
    error_bound,
    evaluate_solution,
    residual,
    solve,
)

__version__ = "0.1.0"
