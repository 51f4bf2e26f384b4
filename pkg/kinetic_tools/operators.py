"""
Pointwise differential operators on callables f(x, t).

Five-point stencils are exact on polynomials of degree <= 4, which is what
the group-invariance and scaling checks are run on.
"""

from typing import Callable

import numpy as np

from data_models.kinetic_system import SystemSpec
from kinetic_tools.geometry import stacked_B

ScalarField = Callable[[np.ndarray, float], float]


def _first(g: Callable[[float], float], h: float) -> float:
    return (g(-2 * h) - 8 * g(-h) + 8 * g(h) - g(2 * h)) / (12 * h)


def _second(g: Callable[[float], float], h: float) -> float:
    return (-g(2 * h) + 16 * g(h) - 30 * g(0.0) + 16 * g(-h) - g(-2 * h)) / (12 * h * h)


def transport_derivative(spec: SystemSpec, f: ScalarField, x: np.ndarray, t: float, h: float = 0.1) -> float:
    """(d/dt + (Bx).grad_x) f at (x, t)."""
    x = np.asarray(x, dtype=float)
    drift = stacked_B(spec) @ x
    out = _first(lambda e: f(x, t + e), h)
    for k in np.flatnonzero(drift):
        unit = np.zeros_like(x)
        unit[k] = 1.0
        out += drift[k] * _first(lambda e: f(x + e * unit, t), h)
    return float(out)


def velocity_laplacian(spec: SystemSpec, f: ScalarField, x: np.ndarray, t: float, h: float = 0.1) -> float:
    x = np.asarray(x, dtype=float)
    out = 0.0
    for k in range(spec.d0):
        unit = np.zeros_like(x)
        unit[k] = 1.0
        out += _second(lambda e: f(x + e * unit, t), h)
    return float(out)


def principal_operator(spec: SystemSpec, f: ScalarField, x: np.ndarray, t: float, h: float = 0.1) -> float:
    """(T - Delta_v) f, the A = Id principal part; zero on solutions."""
    return transport_derivative(spec, f, x, t, h) - velocity_laplacian(spec, f, x, t, h)
