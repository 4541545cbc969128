"""Numerically stable special functions used by the wavefunction evaluators.

Everything here is pure and deterministic.  The Hermite recurrence runs on
the *normalized* oscillator eigenfunctions

    psi_n(x) = (e^{-x^2} / (n! 2^n sqrt(pi)))^{1/2} H_n(x),

never on the raw polynomials H_n, which overflow doubles near n ~ 150.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HermiteFunctionTable",
    "hermite_functions",
    "hermite_function_matrix",
    "log_binomial",
    "gauss_legendre",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class HermiteFunctionTable:
    """Values psi_0(x) .. psi_max_order(x) of the normalized Hermite functions."""

    max_order: int
    point: float
    values: np.ndarray


def hermite_function_matrix(x, max_order: int) -> np.ndarray:
    """Normalized Hermite functions psi_n at many points at once.

    Returns an array of shape ``(len(x), max_order + 1)`` with column n equal
    to psi_n(x).  Upward three-term recurrence on the normalized functions:

        psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}

    |psi_n| <= 1 for all n, so no overflow is possible; far in the classically
    forbidden region the values underflow harmlessly to 0.
    """
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation points must be finite")
    flat = np.atleast_1d(x).ravel()
    out = np.empty((flat.size, max_order + 1))
    out[:, 0] = math.pi ** -0.25 * np.exp(-0.5 * flat * flat)
    if max_order >= 1:
        out[:, 1] = _SQRT2 * flat * out[:, 0]
    for n in range(1, max_order):
        out[:, n + 1] = (
            math.sqrt(2.0 / (n + 1)) * flat * out[:, n]
            - math.sqrt(n / (n + 1)) * out[:, n - 1]
        )
    return out.reshape(x.shape + (max_order + 1,)) if x.shape else out[0]


def hermite_functions(x: float, max_order: int) -> HermiteFunctionTable:
    """Table of psi_0(x) .. psi_max_order(x) at a single quadrature point."""
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    values = hermite_function_matrix(np.array([float(x)]), max_order)[0]
    return HermiteFunctionTable(max_order=max_order, point=float(x), values=values)


def log_binomial(N: int, n: int) -> float:
    """Natural log of the binomial coefficient C(N, n), via log-gamma."""
    if n < 0 or n > N:
        raise ValueError(f"need 0 <= n <= N, got n={n}, N={N}")
    return math.lgamma(N + 1) - math.lgamma(n + 1) - math.lgamma(N - n + 1)


@functools.lru_cache(maxsize=256)
def _gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] by Newton iteration on P_order.

    Chebyshev starting guesses; each root polished to 1e-15.  Deterministic,
    and cached because windows reuse a handful of orders heavily.
    """
    nodes = np.empty(order)
    weights = np.empty(order)
    m = (order + 1) // 2
    for i in range(m):
        z = math.cos(math.pi * (i + 0.75) / (order + 0.5))
        for _ in range(100):
            p1, p2 = 1.0, 0.0
            for j in range(order):
                p1, p2 = ((2 * j + 1) * z * p1 - j * p2) / (j + 1), p1
            # p1 = P_order(z), p2 = P_{order-1}(z)
            dp = order * (z * p1 - p2) / (z * z - 1.0)
            dz = p1 / dp
            z -= dz
            if abs(dz) <= 1e-15:
                break
        nodes[i] = -z
        nodes[order - 1 - i] = z
        w = 2.0 / ((1.0 - z * z) * dp * dp)
        weights[i] = w
        weights[order - 1 - i] = w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(order: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b].

    Integrates polynomials of degree <= 2*order - 1 exactly (to roundoff).
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if not (a < b):
        raise ValueError(f"need a < b, got a={a}, b={b}")
    base_nodes, base_weights = _gauss_legendre_unit(order)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid + half * base_nodes, half * base_weights
