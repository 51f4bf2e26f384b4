"""
Quadrature for integrands with an s^a endpoint singularity on (0, 1].

Gauss-Jacobi absorbs the power on (0, s0]; plain Gauss-Legendre covers
[s0, 1] where the integrand is smooth.
"""

from typing import Callable, Tuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from kinetic_tools.errors import InvalidParametersError


def jacobi_segment(exponent: float, s0: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights with sum w_k phi(s_k) ~ integral_0^s0 s^a phi(s) ds."""
    if exponent <= -1.0:
        raise InvalidParametersError(f"s^{exponent} is not integrable at 0")
    if not s0 > 0 or n < 1:
        raise InvalidParametersError("need s0 > 0 and n >= 1")
    x, w = roots_jacobi(n, 0.0, exponent)
    nodes = 0.5 * s0 * (1.0 + x)
    weights = (0.5 * s0) ** (exponent + 1.0) * w
    return nodes, weights


def legendre_segment(a: float, b: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (1.0 + x), half * w


def split_rule(exponent: float, s0: float = 0.5, n: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rule on (0, 1] for a plain integrand h(s) that behaves like s^a near 0:
    sum w_k h(s_k) ~ integral_0^1 h(s) ds.
    """
    if not 0.0 < s0 < 1.0:
        raise InvalidParametersError("split point must lie in (0, 1)")
    sj, wj = jacobi_segment(exponent, s0, n)
    sl, wl = legendre_segment(s0, 1.0, n)
    # Jacobi weights already carry s^a; undo it so h is used as-is
    wj = wj * sj ** (-exponent)
    return np.concatenate([sj, sl]), np.concatenate([wj, wl])


def integrate_singular(
    func: Callable[[np.ndarray], np.ndarray],
    exponent: float,
    s0: float = 0.5,
    n: int = 32,
) -> float:
    """integral_0^1 func(s) ds where func ~ s^exponent at 0; func is vectorised."""
    nodes, weights = split_rule(exponent, s0, n)
    return float(np.dot(weights, np.asarray(func(nodes), dtype=float)))
