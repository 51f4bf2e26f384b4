"""
Control power functions g_i(s) = s^(1+kappa+alpha_i) / prod_{k=1}^{kappa+1} (k + alpha_i)
and their derivatives.
"""

import logging
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from data_models.control_basis import ControlBasis
from data_utils.settings import KineticSettings, resolve_settings
from kinetic_tools.errors import InvalidParametersError, SingularEvaluationError
from kinetic_tools.quadrature import jacobi_segment

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


# =====================================================
# Exponent selection
# =====================================================
def default_epsilon(beta: float) -> float:
    if beta >= 1.0:
        return 0.0
    return min(0.01, 0.5 * (1.0 - beta))


def balanced_center(beta: float, epsilon: float) -> float:
    return 1.0 / (2.0 + beta + epsilon) - 1.0


def default_alphas(
    kappa: int,
    beta: float,
    epsilon: Optional[float] = None,
    spread: Optional[float] = None,
    settings: Optional[KineticSettings] = None,
) -> List[float]:
    """
    kappa + 1 equally spaced exponents centred on the balanced value.

    Without an explicit ``spread`` the configured ALPHA_SPREAD is used,
    narrowed when needed so that every exponent stays inside (-1, 0) with
    a tenth of the half-width to spare.
    """
    settings = resolve_settings(settings)
    epsilon = default_epsilon(beta) if epsilon is None else epsilon
    if kappa < 1:
        raise InvalidParametersError("kappa must be >= 1")
    center = balanced_center(beta, epsilon)
    if spread is None:
        room = min(center + 1.0, -center)
        spread = min(settings.ALPHA_SPREAD, 1.8 * room / kappa)
    if not spread > 0:
        raise InvalidParametersError(f"spread must be positive, got {spread}")
    alphas = [center + (j - 0.5 * kappa) * spread for j in range(kappa + 1)]
    if alphas[0] <= -1.0 or alphas[-1] >= 0.0:
        raise InvalidParametersError(
            f"spread {spread} pushes exponents outside (-1, 0): {alphas[0]:.6g}..{alphas[-1]:.6g}"
        )
    return alphas


def build_basis(
    kappa: int,
    beta: float,
    alphas: Optional[Sequence[float]] = None,
    epsilon: Optional[float] = None,
    settings: Optional[KineticSettings] = None,
) -> ControlBasis:
    epsilon = default_epsilon(beta) if epsilon is None else epsilon
    if alphas is None:
        alphas = default_alphas(kappa, beta, epsilon, settings=settings)
    return ControlBasis(alphas=tuple(float(a) for a in alphas), kappa=kappa, beta=beta, epsilon=epsilon)


def parse_alphas(text: str) -> List[float]:
    """Parse the comma separated ``--alphas`` flag."""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InvalidParametersError(f"cannot parse alphas {text!r}") from exc
    if not values:
        raise InvalidParametersError("--alphas is empty")
    return values


# =====================================================
# Evaluation
# =====================================================
def _log_denominator(alpha: float, count: int) -> float:
    return float(np.sum(np.log(np.arange(1, count + 1) + alpha)))


def power_coefficient(
    basis: ControlBasis, i: int, m: int, settings: Optional[KineticSettings] = None
) -> float:
    """1 / prod_{k=1}^{kappa+1-m} (k + alpha_i), the coefficient of g_i^(m)."""
    alpha = basis.alphas[i]
    count = basis.kappa + 1 - m
    if basis.kappa > resolve_settings(settings).LOG_SPACE_KAPPA:
        return float(np.exp(-_log_denominator(alpha, count)))
    return float(1.0 / np.prod(np.arange(1, count + 1) + alpha))


def g_eval(
    basis: ControlBasis,
    i: int,
    m: int,
    s: ArrayLike,
    settings: Optional[KineticSettings] = None,
):
    """m-th derivative of g_i at s; scalar in, scalar out."""
    settings = resolve_settings(settings)
    kappa = basis.kappa
    if not 0 <= i <= kappa:
        raise InvalidParametersError(f"basis index {i} out of range 0..{kappa}")
    if not 0 <= m <= kappa + 1:
        raise InvalidParametersError(f"derivative order {m} out of range 0..{kappa + 1}")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise InvalidParametersError("g_eval needs s >= 0")
    exponent = kappa + 1 + basis.alphas[i] - m
    if m == kappa + 1 and np.any(s_arr == 0):
        raise SingularEvaluationError(f"g_{i}^({m}) = s^{basis.alphas[i]} diverges at s = 0")

    if kappa > settings.LOG_SPACE_KAPPA:
        log_den = _log_denominator(basis.alphas[i], kappa + 1 - m)
        with np.errstate(divide="ignore"):
            log_s = np.log(s_arr)
        # exponent > 0 here, so s = 0 maps to exp(-inf) = 0
        value = np.exp(exponent * log_s - log_den)
    else:
        value = s_arr ** exponent * power_coefficient(basis, i, m, settings)
    if np.ndim(s) == 0:
        return float(value)
    return value


def profile_matrix(
    basis: ControlBasis, s: ArrayLike, m: int = 0, settings: Optional[KineticSettings] = None
) -> np.ndarray:
    """g_i^(m)(s_k) for all i, shape (kappa + 1, len(s))."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    return np.vstack([g_eval(basis, i, m, s_arr, settings) for i in range(basis.size)])


def top_derivative_integral(basis: ControlBasis, i: int, n: int = 16) -> float:
    """integral_0^1 |g_i^(kappa+1)(s)| ds by Gauss-Jacobi; equals 1 / (1 + alpha_i)."""
    alpha = basis.alphas[i]
    _, weights = jacobi_segment(alpha, 1.0, n)
    # the integrand is exactly s^alpha, so phi = 1
    return float(np.sum(weights))


# =====================================================
# Proof-weight exponents
# =====================================================
def proof_weight_exponents(basis: ControlBasis) -> Dict[str, object]:
    """
    s-exponents of the two weights that appear when bounding the
    Poincare increments along trajectories: -(beta+eps)(1+alpha_i) for the
    velocity part, alpha_i + (beta+eps)(1+alpha_j) - alpha_j - 1 for the
    cross terms. All must exceed -1 for the weights to be integrable.
    """
    be = basis.beta + basis.epsilon
    velocity = [-be * (1.0 + a) for a in basis.alphas]
    cross = [
        [ai + be * (1.0 + aj) - aj - 1.0 for aj in basis.alphas] for ai in basis.alphas
    ]
    flat = velocity + [v for row in cross for v in row]
    return {
        "velocity": velocity,
        "cross": cross,
        "worst": float(min(flat)),
        "integrable": bool(min(flat) > -1.0),
        "balanced_center": balanced_center(basis.beta, basis.epsilon),
        "balanced_velocity_exponent": -be / (2.0 + be),
        "balanced_cross_exponent": -1.0 + be / (2.0 + be),
    }
