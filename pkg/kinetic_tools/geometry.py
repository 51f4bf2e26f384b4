"""
Group law, dilations and cylinders of a Kolmogorov-type system.

Spatial vectors are stacked (x^(0), ..., x^(kappa)); in that order B has
B_i at block (i, i-1). ``assemble_B`` returns the display-order matrix with
the blocks above the diagonal.
"""

import logging
from math import factorial, gamma, pi
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from data_models.kinetic_system import Cylinder, KineticPoint, LayoutConfig, SystemSpec
from data_utils.random_streams import named_stream
from kinetic_tools.errors import InvalidParametersError

logger = logging.getLogger(__name__)

PointLike = Union[KineticPoint, Sequence[float], np.ndarray]


# =====================================================
# Structural matrices
# =====================================================
def stacked_B(spec: SystemSpec) -> np.ndarray:
    B = np.zeros((spec.N, spec.N))
    for i in range(1, spec.kappa + 1):
        B[spec.layer_slice(i), spec.layer_slice(i - 1)] = spec.block(i)
    return B


def display_permutation(spec: SystemSpec) -> np.ndarray:
    """Indices such that ``display = stacked[perm]``."""
    return np.concatenate(
        [np.arange(spec.offsets[i], spec.offsets[i] + spec.dims[i]) for i in range(spec.kappa, -1, -1)]
    )


def assemble_B(spec: SystemSpec) -> np.ndarray:
    """N x N coupling matrix in display order (x^(kappa), ..., x^(0))."""
    perm = display_permutation(spec)
    return stacked_B(spec)[np.ix_(perm, perm)]


def composed_block(spec: SystemSpec, i: int, j: int) -> np.ndarray:
    """B_i B_{i-1} ... B_j, shape d_i x d_{j-1}."""
    if not (1 <= j <= i <= spec.kappa):
        raise InvalidParametersError(
            f"composed_block needs 1 <= j <= i <= kappa, got i={i}, j={j}"
        )
    out = spec.block(i)
    for k in range(i - 1, j - 1, -1):
        out = out @ spec.block(k)
    return out


def exp_tB(spec: SystemSpec, t: float, layout: str = "stacked") -> np.ndarray:
    """exp(tB) as the finite series sum_{m <= kappa} (tB)^m / m!."""
    if layout not in ("stacked", "display"):
        raise InvalidParametersError(f"unknown layout {layout!r}")
    B = stacked_B(spec) if layout == "stacked" else assemble_B(spec)
    out = np.eye(spec.N)
    term = np.eye(spec.N)
    for m in range(1, spec.kappa + 1):
        term = term @ (t * B)
        out = out + term / factorial(m)
    return out


def exp_tB_batch(spec: SystemSpec, t: np.ndarray) -> np.ndarray:
    """exp(t_k B) for a vector of times, shape (n, N, N)."""
    t = np.asarray(t, dtype=float).ravel()
    B = stacked_B(spec)
    out = np.broadcast_to(np.eye(spec.N), (t.size, spec.N, spec.N)).copy()
    power = np.eye(spec.N)
    for m in range(1, spec.kappa + 1):
        power = power @ B
        out += (t[:, None, None] ** m) * power[None] / factorial(m)
    return out


# =====================================================
# Group law and dilations
# =====================================================
def _split(point: PointLike, spec: SystemSpec):
    if isinstance(point, KineticPoint):
        return point.vector, float(point.t)
    arr = np.asarray(point, dtype=float)
    if arr.shape != (spec.N + 1,):
        raise InvalidParametersError(
            f"expected a stacked point of length {spec.N + 1}, got shape {arr.shape}"
        )
    return arr[:-1], float(arr[-1])


def group_compose(spec: SystemSpec, z_tilde: PointLike, z: PointLike) -> KineticPoint:
    """z_tilde o z = (x + exp(tB) x_tilde, t + t_tilde)."""
    xt, tt = _split(z_tilde, spec)
    x, t = _split(z, spec)
    return KineticPoint.from_array(x + exp_tB(spec, t) @ xt, t + tt)


def group_inverse(spec: SystemSpec, z: PointLike) -> KineticPoint:
    x, t = _split(z, spec)
    return KineticPoint.from_array(-exp_tB(spec, -t) @ x, -t)


def dilate(spec: SystemSpec, r: float, z: PointLike) -> KineticPoint:
    """Layer i scaled by r^(1 + 2 i beta), time by r^(2 beta)."""
    if not r > 0:
        raise InvalidParametersError(f"dilation factor must be positive, got {r}")
    x, t = _split(z, spec)
    scale = r ** spec.layer_exponents()
    return KineticPoint.from_array(scale * x, (r ** (2.0 * spec.beta)) * t)


def compose_array(spec: SystemSpec, z_tilde: PointLike, points: np.ndarray) -> np.ndarray:
    """z_tilde o z for each row z of an (n, N+1) array."""
    xt, tt = _split(z_tilde, spec)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    E = exp_tB_batch(spec, points[:, -1])
    x = points[:, :-1] + np.einsum("nij,j->ni", E, xt)
    return np.hstack([x, (points[:, -1] + tt)[:, None]])


def dilate_array(spec: SystemSpec, r: float, points: np.ndarray) -> np.ndarray:
    if not r > 0:
        raise InvalidParametersError(f"dilation factor must be positive, got {r}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    scale = np.append(r ** spec.layer_exponents(), r ** (2.0 * spec.beta))
    return points * scale[None, :]


# =====================================================
# Cylinders
# =====================================================
def make_cylinder(
    spec: SystemSpec,
    center: Optional[KineticPoint] = None,
    radius: float = 1.0,
    time_interval=(-1.0, 0.0),
    label: Optional[str] = None,
) -> Cylinder:
    return Cylinder(
        center=center if center is not None else KineticPoint.origin(spec),
        radius=radius,
        time_interval=tuple(time_interval),
        label=label,
    )


def _template_coordinates(spec: SystemSpec, cyl: Cylinder, points: np.ndarray) -> np.ndarray:
    inv_center = group_inverse(spec, cyl.center)
    pulled = compose_array(spec, inv_center, points)
    return dilate_array(spec, 1.0 / cyl.radius, pulled)


def _template_mask(spec: SystemSpec, cyl: Cylinder, w: np.ndarray) -> np.ndarray:
    mask = np.ones(w.shape[0], dtype=bool)
    for i in range(spec.kappa + 1):
        mask &= np.linalg.norm(w[:, spec.layer_slice(i)], axis=1) < 1.0
    lo, hi = cyl.time_interval
    mask &= (w[:, -1] > lo) & (w[:, -1] <= hi)
    return mask


def cylinder_contains_array(spec: SystemSpec, cyl: Cylinder, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != spec.N + 1:
        raise InvalidParametersError("points must have N + 1 columns")
    return _template_mask(spec, cyl, _template_coordinates(spec, cyl, points))


def cylinder_contains(spec: SystemSpec, cyl: Cylinder, z: PointLike) -> bool:
    x, t = _split(z, spec)
    return bool(cylinder_contains_array(spec, cyl, np.append(x, t)[None, :])[0])


def _unit_ball(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    out = np.empty((0, dim))
    while out.shape[0] < n:
        need = n - out.shape[0]
        draw = rng.uniform(-1.0, 1.0, size=(2 * need + 16, dim))
        keep = draw[np.linalg.norm(draw, axis=1) < 1.0]
        out = np.vstack([out, keep[:need]])
    return out


def cylinder_sample_array(spec: SystemSpec, cyl: Cylinder, n: int, seed: int) -> np.ndarray:
    """n points uniform in ``cyl`` as an (n, N+1) array, deterministic per seed."""
    if n < 0:
        raise InvalidParametersError("sample count must be non-negative")
    rng = named_stream(seed, "cylinder-sample")
    layers = [_unit_ball(rng, n, d) for d in spec.dims]
    lo, hi = cyl.time_interval
    # (lo, hi] rather than [lo, hi)
    t = hi - rng.uniform(0.0, 1.0, size=n) * (hi - lo)
    template = np.hstack(layers + [t[:, None]])
    return compose_array(spec, cyl.center, dilate_array(spec, cyl.radius, template))


def cylinder_sample(spec: SystemSpec, cyl: Cylinder, n: int, seed: int) -> List[KineticPoint]:
    pts = cylinder_sample_array(spec, cyl, n, seed)
    return [KineticPoint.from_array(p[:-1], p[-1]) for p in pts]


def absolute_time_interval(spec: SystemSpec, cyl: Cylinder) -> tuple:
    scale = cyl.radius ** (2.0 * spec.beta)
    lo, hi = cyl.time_interval
    return cyl.center.t + scale * lo, cyl.center.t + scale * hi


def cylinder_volume(spec: SystemSpec, cyl: Cylinder) -> float:
    """Lebesgue measure; left translations have unit Jacobian."""
    vol = 1.0
    for i, d in enumerate(spec.dims):
        ball = pi ** (d / 2.0) / gamma(d / 2.0 + 1.0)
        vol *= ball * cyl.radius ** (d * (1.0 + 2.0 * i * spec.beta))
    lo, hi = cyl.time_interval
    return vol * (hi - lo) * cyl.radius ** (2.0 * spec.beta)


def cylinder_layout(spec: SystemSpec, config: Optional[LayoutConfig] = None) -> Dict[str, Cylinder]:
    """Q+ = Q_1 followed, going back in time, by Q0 and Q-."""
    config = config or LayoutConfig()
    interval = (-config.window, 0.0)
    origin = KineticPoint.origin(spec)
    return {
        "plus": make_cylinder(spec, origin, 1.0, interval, "Q+"),
        "zero": make_cylinder(spec, origin.with_time(config.zero_top), 1.0, interval, "Q0"),
        "minus": make_cylinder(spec, origin.with_time(config.minus_top), 1.0, interval, "Q-"),
    }


def ambient_cylinder(spec: SystemSpec, radius: float) -> Cylinder:
    return make_cylinder(spec, KineticPoint.origin(spec), radius, (-1.0, 0.0), "Q_R")


def homogeneous_norm(spec: SystemSpec, z: PointLike) -> float:
    """max over layers of |x^(i)|^(1/(1+2 i beta)) and |t|^(1/(2 beta))."""
    x, t = _split(z, spec)
    parts = [
        np.linalg.norm(x[spec.layer_slice(i)]) ** (1.0 / (1.0 + 2.0 * i * spec.beta))
        for i in range(spec.kappa + 1)
    ]
    parts.append(abs(t) ** (1.0 / (2.0 * spec.beta)))
    return float(max(parts))
