"""Weakly singular moment integrals.

The integrals needed by the collocation system are

    I(x, j) = int_a^x (t - z)^j / (phi(x) - phi(t))^alpha dt,

and they are computed by splitting the kernel into the singular part
(x - t)^-alpha, absorbed by a Gauss-Jacobi rule, and the smooth ratio
((x - t) / (phi(x) - phi(t)))^alpha. When ``phi`` is the identity the
integral has a closed form, which is used instead.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalError, ValidationError

#: Env var that overrides :func:`default_node_count`.
NODES_ENV_VAR = "ABELTC_QUAD_NODES"

#: Node count used for a-posteriori residuals and manufactured right-hand sides.
RESIDUAL_NODES = 96
MANUFACTURED_NODES = 128

#: Relative threshold below which phi(x) - phi(t) is treated as cancelled.
CANCELLATION_DELTA = 1e-12

MAX_NODES = 512


class SingularRatioError(NumericalError):
    """phi(x) - phi(t) <= 0 for some t < x, i.e. phi is not increasing."""


class EigenvalueConvergenceError(NumericalError):
    pass


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Jacobi rule for the weight (1 - s)^-alpha on [-1, 1]."""

    alpha: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def total_mass(self) -> float:
        return 2.0 ** (1.0 - self.alpha) / (1.0 - self.alpha)


def _jacobi_recurrence(m: int, p: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the Jacobi matrix for weight (1-s)^p (1+s)^q."""
    k = np.arange(m, dtype=np.float64)
    s = 2.0 * k + p + q
    diag = np.empty(m)
    diag[0] = (q - p) / (p + q + 2.0)
    diag[1:] = (q * q - p * p) / (s[1:] * (s[1:] + 2.0))

    k = k[1:]
    s = s[1:]
    off = np.sqrt(
        4.0 * k * (k + p) * (k + q) * (k + p + q)
        / (s * s * (s + 1.0) * (s - 1.0))
    )
    return diag, off


def _tridiagonal_eig_first_row(diag, off, tol: float = np.finfo(float).eps, max_iter: int | None = None):
    """Eigenvalues of a symmetric tridiagonal matrix and the first component
    of each normalized eigenvector, by implicit-shift QL iteration.

    Only the first row of the eigenvector matrix is accumulated, which is all
    Golub-Welsch needs.
    """
    n = len(diag)
    d = [float(v) for v in diag]
    e = [float(v) for v in off] + [0.0]
    z = [1.0] + [0.0] * (n - 1)
    if max_iter is None:
        max_iter = 50 * n

    iterations = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= tol * dd or abs(e[m]) < 1e-300:
                    break
                m += 1
            if m == l:
                break

            iterations += 1
            if iterations > max_iter:
                raise EigenvalueConvergenceError(
                    f"tridiagonal QL did not converge in {max_iter} iterations"
                )

            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            deflated = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b

                f = z[i + 1]
                z[i + 1] = s * z[i] + c * f
                z[i] = c * z[i] - s * f
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0

    return np.array(d), np.array(z)


@functools.lru_cache(maxsize=None)
def jacobi_rule(m: int, alpha: float) -> QuadratureRule:
    """m-point Gauss-Jacobi rule for the weight (1 - s)^-alpha on [-1, 1].

    Nodes and weights come from the Golub-Welsch eigenproblem. The rule is
    exact for polynomials of degree <= 2m - 1. Results are cached per
    ``(m, alpha)``.
    """
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= MAX_NODES:
        raise ValidationError(f"node count must be in [1, {MAX_NODES}], got {m!r}")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0,1), got {alpha!r}")

    diag, off = _jacobi_recurrence(int(m), -float(alpha), 0.0)
    eigvals, first = _tridiagonal_eig_first_row(diag, off)
    order = np.argsort(eigvals)
    mass = 2.0 ** (1.0 - alpha) / (1.0 - alpha)

    nodes = eigvals[order]
    weights = mass * first[order] ** 2
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(float(alpha), nodes, weights)


def default_node_count(n: int) -> int:
    """Assembly node count for Taylor degree ``n``: max(32, 2n + 8), unless
    overridden by the ``ABELTC_QUAD_NODES`` environment variable."""
    override = os.environ.get(NODES_ENV_VAR)
    if override:
        try:
            value = int(override)
        except ValueError:
            raise ValidationError(
                f"{NODES_ENV_VAR} must be an integer, got {override!r}"
            ) from None
        if not 4 <= value <= MAX_NODES:
            raise ValidationError(f"{NODES_ENV_VAR} must be in [4, {MAX_NODES}]")
        return value
    return max(32, 2 * n + 8)


def near_singularity_ratio(x, t, phi: Callable, phi_prime: Callable):
    """(x - t) / (phi(x) - phi(t)), falling back to 1 / phi'((x + t) / 2)
    where the difference has cancelled to below the relative threshold."""
    t = np.asarray(t, dtype=np.float64)
    fx = float(phi(x))
    diff = fx - np.asarray(phi(t), dtype=np.float64)
    guarded = np.abs(diff) <= CANCELLATION_DELTA * max(abs(fx), 1.0)

    if np.any(~guarded & (diff <= 0.0)):
        raise SingularRatioError(
            f"phi(x) - phi(t) <= 0 on [t, x] with x={x!r}: phi is not increasing"
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (x - t) / diff
    if np.any(guarded):
        slope = np.asarray(phi_prime((x + t[guarded]) / 2.0), dtype=np.float64)
        if np.any(slope == 0.0):
            raise NumericalError("phi'((x + t) / 2) = 0: phi must be strictly increasing")
        ratio = np.where(guarded, 0.0, ratio)
        ratio[guarded] = 1.0 / slope
    if ratio.ndim == 0:
        return float(ratio)
    return ratio


@dataclass(frozen=True)
class SingularIntegralSpec:
    x: float
    j: int
    z: float
    a: float
    alpha: float
    phi: Callable
    phi_prime: Callable
    #: phi is exactly t; enables the closed form
    identity: bool = False


def singular_integral_identity_phi(x: float, j: int, z: float, a: float, alpha: float) -> float:
    """Closed form of I(x, j) for phi(t) = t."""
    total = 0.0
    h = x - a
    for k in range(j + 1):
        e = k + 1.0 - alpha
        total += math.comb(j, k) * (x - z) ** (j - k) * (-1) ** k * h ** e / e
    return total


def _kernel_factors(x, a, alpha, phi, phi_prime, m):
    """Points t_i and combined weights w_i * ratio_i^alpha * ((x-a)/2)^(1-alpha)."""
    rule = jacobi_rule(m, alpha)
    h = x - a
    t = x - h * (1.0 - rule.nodes) / 2.0
    ratio = near_singularity_ratio(x, t, phi, phi_prime)
    return t, (h / 2.0) ** (1.0 - alpha) * rule.weights * ratio**alpha


def moments(
    x: float,
    n: int,
    z: float,
    a: float,
    alpha: float,
    phi: Callable,
    phi_prime: Callable,
    m: int,
    identity: bool = False,
) -> np.ndarray:
    """I(x, j) for j = 0..n, sharing one set of kernel evaluations."""
    if x < a:
        raise ValidationError(f"upper limit x={x!r} is below a={a!r}")
    if x == a:
        return np.zeros(n + 1)
    if identity:
        return np.array([singular_integral_identity_phi(x, j, z, a, alpha) for j in range(n + 1)])
    t, factor = _kernel_factors(x, a, alpha, phi, phi_prime, m)
    powers = (t - z)[None, :] ** np.arange(n + 1)[:, None]
    return np.sum(powers * factor, axis=1)


def singular_integral(spec: SingularIntegralSpec, m: int, force_quadrature: bool = False) -> float:
    """I(x, j) for one moment. Identity ``phi`` uses the closed form unless
    ``force_quadrature`` is set."""
    if m < 4:
        raise ValidationError(f"singular_integral needs m >= 4, got {m}")
    use_closed_form = spec.identity and not force_quadrature
    row = moments(
        spec.x, spec.j, spec.z, spec.a, spec.alpha, spec.phi, spec.phi_prime, m,
        identity=use_closed_form,
    )
    return float(row[spec.j])


def apply_kernel(f: Callable, x: float, a: float, alpha: float, phi, phi_prime, m: int) -> float:
    """int_a^x f(t) / (phi(x) - phi(t))^alpha dt for a smooth f."""
    if x == a:
        return 0.0
    t, factor = _kernel_factors(x, a, alpha, phi, phi_prime, m)
    return float(np.sum(np.asarray(f(t), dtype=np.float64) * factor))
