"""
Controlled trajectories joining a cylinder endpoint z_+/- to an
intermediate point z_0, and the affine maps they induce.

Gamma(s) = (T(s) x_endpoint + W^delta(s) M, (1 - s) t_endpoint + s t_0),
with M chosen so that Gamma(1) = z_0.
"""

import logging
from typing import Dict, Optional, Sequence

import numpy as np

from data_models.control_basis import ControlBasis
from data_models.kinetic_system import KineticPoint, LayoutConfig, SystemSpec
from data_models.trajectory import AffineMap, RadiusEstimate, SlopeFit, TrajectoryBundle
from data_utils.random_streams import spawn_seeds
from data_utils.settings import KineticSettings, resolve_settings
from kinetic_tools.errors import InvalidParametersError, SingularMapError
from kinetic_tools.geometry import cylinder_layout, cylinder_sample_array, exp_tB_batch, stacked_B
from kinetic_tools.quadrature import split_rule
from kinetic_tools.wronskian import WronskianBundle, svd_pinv

logger = logging.getLogger(__name__)


# =====================================================
# Boundary solve
# =====================================================
def solve_control(
    spec: SystemSpec,
    basis: ControlBasis,
    z_endpoint: KineticPoint,
    z_0: KineticPoint,
    method: Optional[str] = None,
    settings: Optional[KineticSettings] = None,
) -> TrajectoryBundle:
    settings = resolve_settings(settings)
    delta = float(z_0.t - z_endpoint.t)
    wb = WronskianBundle(spec, basis, delta, settings)

    x_end = z_endpoint.vector
    defect = z_0.vector - wb.T1 @ x_end
    if not np.any(defect):
        control = np.zeros(wb.size)
    else:
        G = wb.pseudo_inverse_Wdelta1(method)
        W = wb.wdelta(1.0)
        control = G @ defect
        # one refinement step on the boundary equation
        control = control + G @ (defect - W @ control)

    reached = wb.T1 @ x_end + wb.wdelta(1.0) @ control
    residual = float(np.max(np.abs(reached - z_0.vector)))
    if residual > settings.ENDPOINT_TOLERANCE * max(1.0, float(np.max(np.abs(z_0.vector)))):
        logger.warning("Boundary solve residual %.3e exceeds tolerance", residual)

    return TrajectoryBundle(
        spec=spec,
        basis=basis,
        endpoint=z_endpoint,
        target=z_0,
        delta=delta,
        control=control,
        defect=defect,
        wronskian=wb,
        residual=residual,
    )


def _check_s(s: float, lo_open: bool = False) -> float:
    s = float(s)
    if not (0.0 <= s <= 1.0):
        raise InvalidParametersError(f"s must lie in [0, 1], got {s}")
    if lo_open and s == 0.0:
        raise SingularMapError("the map is singular at s = 0")
    return s


# =====================================================
# Path evaluation
# =====================================================
def eval_trajectory(bundle: TrajectoryBundle, s: float) -> KineticPoint:
    s = _check_s(s)
    if s == 0.0:
        return bundle.endpoint
    row = eval_path(bundle, [s])[0]
    return KineticPoint.from_array(row[:-1], row[-1])


def eval_path(bundle: TrajectoryBundle, s_values: Sequence[float]) -> np.ndarray:
    """Stacked path samples, shape (n, N + 1), evaluated in one batch."""
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    if np.any((s < 0.0) | (s > 1.0)):
        raise InvalidParametersError("s must lie in [0, 1]")
    spec = bundle.spec
    wb = bundle.wronskian
    x = np.einsum("nij,j->ni", exp_tB_batch(spec, s * bundle.delta), bundle.endpoint.vector)
    if not bundle.is_trivial:
        k = bundle.basis.kappa
        exponents = np.add.outer(1.0 + np.arange(k + 1), np.asarray(bundle.basis.alphas))
        # exponents are positive, so s = 0 gives exactly zero
        P = s[:, None, None] ** exponents[None] * wb.p_matrix(1.0)[None]
        WM = (P @ bundle.control_blocks()).reshape(len(s), -1)
        x = x + WM @ wb.scaling_matrix_R().T
    t = (1.0 - s) * bundle.endpoint.t + s * bundle.target.t
    return np.hstack([x, t[:, None]])


def eval_velocity(bundle: TrajectoryBundle, s: float) -> np.ndarray:
    """d Gamma / ds at s > 0 as an (N + 1)-vector (time component delta)."""
    s = _check_s(s, lo_open=True)
    wb = bundle.wronskian
    B = stacked_B(bundle.spec)
    dx = bundle.delta * B @ (wb.transport_matrix_T(s) @ bundle.endpoint.vector)
    dx = dx + wb.scaling_matrix_R() @ (wb.wronskian_derivative(s) @ bundle.control)
    return np.append(dx, bundle.delta)


def control_signal(bundle: TrajectoryBundle, s: float) -> np.ndarray:
    """sum_i m^(i) s^alpha_i, the velocity-layer rate of the controlled path."""
    s = _check_s(s, lo_open=True)
    weights = np.array([s ** a for a in bundle.basis.alphas])
    return weights @ bundle.control_blocks()


def endpoint_residual(bundle: TrajectoryBundle) -> float:
    start = eval_path(bundle, [0.0])[0]
    end = eval_path(bundle, [1.0])[0]
    want_start = np.append(bundle.endpoint.vector, bundle.endpoint.t)
    want_end = np.append(bundle.target.vector, bundle.target.t)
    return float(max(np.max(np.abs(start - want_start)), np.max(np.abs(end - want_end))))


def tangent_length(bundle: TrajectoryBundle, settings: Optional[KineticSettings] = None) -> float:
    """integral_0^1 |d Gamma / ds| ds on the split Jacobi/Legendre rule."""
    settings = resolve_settings(settings)
    exponent = min(bundle.basis.alphas) if not bundle.is_trivial else 0.0
    nodes, weights = split_rule(exponent, settings.QUADRATURE_SPLIT, settings.QUADRATURE_NODES)
    speeds = np.array([np.linalg.norm(eval_velocity(bundle, s)) for s in nodes])
    return float(np.dot(weights, speeds))


# =====================================================
# Affine connection maps
# =====================================================
def _connection_matrix(bundle: TrajectoryBundle, s: float, method: Optional[str] = None) -> np.ndarray:
    wb = bundle.wronskian
    return wb.wdelta(s) @ wb.pseudo_inverse_Wdelta1(method)


def phi_map(bundle: TrajectoryBundle, s: float, method: Optional[str] = None) -> AffineMap:
    """x_0 -> spatial part of Gamma(s) for the bundle's endpoint."""
    s = _check_s(s, lo_open=True)
    wb = bundle.wronskian
    A = _connection_matrix(bundle, s, method)
    offset = (wb.transport_matrix_T(s) - A @ wb.T1) @ bundle.endpoint.vector
    return AffineMap(matrix=A, offset=offset, diagnostics={"kind": "phi", "s": s})


def psi_map(
    bundle: TrajectoryBundle,
    s: float,
    method: Optional[str] = None,
    settings: Optional[KineticSettings] = None,
) -> AffineMap:
    """x_endpoint -> spatial part of Gamma(s), for s in [0, s0]."""
    settings = resolve_settings(settings)
    s = _check_s(s)
    if s > settings.PSI_S0:
        raise InvalidParametersError(f"psi_map is defined for s <= {settings.PSI_S0}, got {s}")
    wb = bundle.wronskian
    if s == 0.0:
        matrix = np.eye(bundle.spec.N)
        offset = np.zeros(bundle.spec.N)
    else:
        A = _connection_matrix(bundle, s, method)
        matrix = wb.transport_matrix_T(s) - A @ wb.T1
        offset = A @ bundle.target.vector
    sigma = np.linalg.svd(matrix, compute_uv=False)
    cond = float(sigma[0] / sigma[-1]) if sigma[-1] > 0 else float("inf")
    diagnostics = {
        "kind": "psi",
        "s": s,
        "condition_number": cond,
        "min_singular_value": float(sigma[-1]),
        "near_singular": cond > settings.PSI_CONDITION_LIMIT,
    }
    if diagnostics["near_singular"]:
        logger.warning("psi_map near singular at s=%.4g (cond=%.3e)", s, cond)
    return AffineMap(matrix=matrix, offset=offset, diagnostics=diagnostics)


def grad_phi_inverse(bundle: TrajectoryBundle, s: float) -> np.ndarray:
    """Derivative of (Phi^s)^-1 along the x^(0) slot, an N x d0 matrix."""
    s = _check_s(s, lo_open=True)
    wb = bundle.wronskian
    spec = bundle.spec
    e0 = np.zeros((spec.N, spec.d0))
    e0[: spec.d0, :] = np.eye(spec.d0)
    if wb.is_square:
        # R^-1 E0 = E0, so only W(1) W(s)^-1 on the first block column is needed
        inner = wb.W1 @ (wb.wronskian_inverse(s)[:, : spec.d0])
        return wb.scaling_matrix_R() @ inner
    inv = svd_pinv(wb.wdelta(s), wb.settings.PINV_TOLERANCE)
    return wb.wdelta(1.0) @ (inv @ e0)


# =====================================================
# Diagnostics
# =====================================================
def singularity_slope(bundle: TrajectoryBundle, settings: Optional[KineticSettings] = None) -> SlopeFit:
    settings = resolve_settings(settings)
    lo, hi = settings.slope_window()
    predicted = -1.0 - max(bundle.basis.alphas)
    if bundle.is_trivial:
        return SlopeFit(None, None, predicted, (lo, hi), 0, excluded=True, reason="zero control: map not invertible")
    if not bundle.wronskian.is_square:
        return SlopeFit(None, None, predicted, (lo, hi), 0, excluded=True, reason="non-square system")
    nodes = np.logspace(np.log10(lo), np.log10(hi), settings.SLOPE_NODES)
    norms = np.array([np.linalg.norm(grad_phi_inverse(bundle, s)) for s in nodes])
    slope, intercept = np.polyfit(np.log(nodes), np.log(norms), 1)
    return SlopeFit(float(slope), float(intercept), predicted, (lo, hi), len(nodes))


def sample_connection_pairs(
    spec: SystemSpec,
    layout: Optional[LayoutConfig] = None,
    n: int = 100,
    seed: int = 0,
) -> Dict[str, np.ndarray]:
    """n points each in Q+, Q0 and Q-, as (n, N + 1) arrays."""
    cylinders = cylinder_layout(spec, layout)
    seeds = spawn_seeds(seed, "connection-pairs", 3)
    return {
        name: cylinder_sample_array(spec, cylinders[name], n, s)
        for name, s in zip(("plus", "zero", "minus"), seeds)
    }


def bounding_radius(
    spec: SystemSpec,
    basis: ControlBasis,
    layout: Optional[LayoutConfig] = None,
    n_samples: int = 1000,
    seed: int = 0,
    s_nodes: int = 33,
    settings: Optional[KineticSettings] = None,
) -> RadiusEstimate:
    """
    Largest homogeneous size reached by trajectories from Q+ and Q- to Q0.
    Layer i contributes |x^(i)|^(1/(1+2 i beta)), time |t|^(1/(2 beta)).
    """
    settings = resolve_settings(settings)
    pairs = sample_connection_pairs(spec, layout, n_samples, seed)
    s_grid = np.linspace(0.0, 1.0, s_nodes)
    per_layer = {f"x{i}": 0.0 for i in range(spec.kappa + 1)}
    per_layer["t"] = 0.0

    for k in range(n_samples):
        z0 = KineticPoint.from_array(pairs["zero"][k, :-1], pairs["zero"][k, -1])
        for name in ("plus", "minus"):
            row = pairs[name][k]
            bundle = solve_control(spec, basis, KineticPoint.from_array(row[:-1], row[-1]), z0, settings=settings)
            path = eval_path(bundle, s_grid)
            for i in range(spec.kappa + 1):
                norms = np.linalg.norm(path[:, spec.layer_slice(i)], axis=1)
                size = float(np.max(norms)) ** (1.0 / (1.0 + 2.0 * i * spec.beta))
                per_layer[f"x{i}"] = max(per_layer[f"x{i}"], size)
            t_size = float(np.max(np.abs(path[:, -1]))) ** (1.0 / (2.0 * spec.beta))
            per_layer["t"] = max(per_layer["t"], t_size)

    attained_by = max(per_layer, key=per_layer.get)
    logger.info(
        "Bounding radius %.4g attained by %s over %d pairs", per_layer[attained_by], attained_by, n_samples
    )
    return RadiusEstimate(
        radius=per_layer[attained_by],
        attained_by=attained_by,
        per_layer=per_layer,
        n_samples=n_samples,
        seed=seed,
    )
