"""
Explicit finite-volume solver for the local Kolmogorov equation

    d_t f + (Bx).grad_x f = div_v (A grad_v f) + S

on a cell-centred tensor grid, for the chain B_i = Id, d_i = d, beta = 1.

Diffusion uses conservative face fluxes with harmonic-mean A (cross terms
for d0 > 1 use arithmetic face averages); transport uses first-order
upwind fluxes; time stepping is explicit Euler. With d0 = 1 and CFL number
<= 1 every update is a convex combination, so the scheme is monotone.
"""

import logging
import time
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np

from data_models.grid_field import BoundaryPolicy, GridField
from data_models.kinetic_system import SystemSpec
from data_utils.settings import KineticSettings, resolve_settings
from kinetic_tools.errors import (
    CFLViolationError,
    DivergenceError,
    InvalidParametersError,
    UnsupportedModeError,
)

logger = logging.getLogger(__name__)

SCHEME_NAME = "explicit-euler/harmonic-face-diffusion/upwind-transport"


# =====================================================
# Grid plumbing
# =====================================================
def _axis_layers(spec: SystemSpec) -> List[int]:
    return [i for i, d in enumerate(spec.dims) for _ in range(d)]


def _uniform_width(edges: np.ndarray, axis: int) -> float:
    w = np.diff(edges)
    if not np.allclose(w, w[0], rtol=1e-10, atol=0.0):
        raise InvalidParametersError(f"axis {axis} is not uniformly spaced")
    return float(w[0])


def _pad(f: np.ndarray, modes: List[str], ghost_source: Optional[np.ndarray] = None) -> np.ndarray:
    """One ghost cell per side; frozen axes copy their ghosts from ``ghost_source``."""
    out = f
    for axis, mode in enumerate(modes):
        width = [(0, 0)] * out.ndim
        width[axis] = (1, 1)
        if mode == "periodic":
            out = np.pad(out, width, mode="wrap")
        elif mode == "dirichlet-zero":
            out = np.pad(out, width, mode="constant")
        else:
            out = np.pad(out, width, mode="edge")
    if ghost_source is not None:
        for axis, mode in enumerate(modes):
            if mode == "dirichlet-frozen-inflow":
                for side in (0, -1):
                    idx = [slice(None)] * out.ndim
                    idx[axis] = side
                    out[tuple(idx)] = ghost_source[tuple(idx)]
    return out


def _pad_coefficient(A: np.ndarray, modes: List[str]) -> np.ndarray:
    out = A
    for axis, mode in enumerate(modes):
        width = [(0, 0)] * out.ndim
        width[axis] = (1, 1)
        out = np.pad(out, width, mode="wrap" if mode == "periodic" else "edge")
    return out


def _view(arr: np.ndarray, ndim: int, overrides: Dict[int, slice]) -> np.ndarray:
    idx = [slice(1, -1)] * ndim
    for axis, sl in overrides.items():
        idx[axis] = sl
    return arr[tuple(idx)]


# =====================================================
# Operator pieces
# =====================================================
def diffusion_term(fp: np.ndarray, Ap: np.ndarray, d0: int, h: List[float]) -> np.ndarray:
    """div_v (A grad_v f) on interior cells, from padded f and A."""
    nd = fp.ndim
    lo, hi = slice(0, -1), slice(1, None)
    out = np.zeros(tuple(n - 2 for n in fp.shape))
    for k in range(d0):
        a_l = _view(Ap[..., k, k], nd, {k: lo})
        a_r = _view(Ap[..., k, k], nd, {k: hi})
        a_face = 2.0 * a_l * a_r / (a_l + a_r)
        flux = a_face * (_view(fp, nd, {k: hi}) - _view(fp, nd, {k: lo})) / h[k]
        for l in range(d0):
            if l == k:
                continue
            up, down = slice(2, None), slice(0, -2)
            grad_l = (
                _view(fp, nd, {k: lo, l: up}) - _view(fp, nd, {k: lo, l: down})
                + _view(fp, nd, {k: hi, l: up}) - _view(fp, nd, {k: hi, l: down})
            ) / (4.0 * h[l])
            a_kl = 0.5 * (_view(Ap[..., k, l], nd, {k: lo}) + _view(Ap[..., k, l], nd, {k: hi}))
            flux = flux + a_kl * grad_l
        out += np.diff(flux, axis=k) / h[k]
    return out


def transport_term(fp: np.ndarray, velocities: List[Tuple[int, np.ndarray]], h: List[float]) -> np.ndarray:
    """(Bx).grad_x f by upwind fluxes; ``velocities`` pairs an axis with its broadcast speed."""
    nd = fp.ndim
    out = np.zeros(tuple(n - 2 for n in fp.shape))
    for axis, c in velocities:
        c_pos = np.maximum(c, 0.0)
        c_neg = np.minimum(c, 0.0)
        flux = c_pos * _view(fp, nd, {axis: slice(0, -1)}) + c_neg * _view(fp, nd, {axis: slice(1, None)})
        out += np.diff(flux, axis=axis) / h[axis]
    return out


def _transport_velocities(spec: SystemSpec, centers: List[np.ndarray]) -> List[Tuple[int, np.ndarray]]:
    nd = spec.N
    pairs = []
    for i in range(1, spec.kappa + 1):
        for k in range(spec.dims[i]):
            axis = spec.offsets[i] + k
            source_axis = spec.offsets[i - 1] + k
            shape = [1] * nd
            shape[source_axis] = len(centers[source_axis])
            pairs.append((axis, centers[source_axis].reshape(shape)))
    return pairs


def stability_rate(spec: SystemSpec, A: np.ndarray, centers: List[np.ndarray], h: List[float]) -> float:
    """dt * rate is the CFL number of the explicit update."""
    mats = A.reshape(-1, spec.d0, spec.d0)
    lam_max = float(np.linalg.eigvalsh(mats).max())
    rate = sum(2.0 * lam_max / h[k] ** 2 for k in range(spec.d0))
    for axis, c in _transport_velocities(spec, centers):
        rate += float(np.max(np.abs(c))) / h[axis]
    return rate


# =====================================================
# Solver
# =====================================================
def fd_solve(
    spec: SystemSpec,
    initial: GridField,
    t_span: Tuple[float, float],
    dt: Optional[float] = None,
    boundary: Optional[BoundaryPolicy] = None,
    coefficient: Optional[np.ndarray] = None,
    source: Optional[np.ndarray] = None,
    time_cells: int = 50,
    record: Literal["cells", "final"] = "cells",
    settings: Optional[KineticSettings] = None,
) -> GridField:
    """
    Advance ``initial`` (a static field) over ``t_span``.

    With record="cells" the result carries ``time_cells`` equal time cells
    whose values are snapshots at the cell mid-times; with record="final"
    it is the static field at t_span[1].
    """
    settings = resolve_settings(settings)
    boundary = boundary or BoundaryPolicy()
    if spec.beta != 1.0:
        raise UnsupportedModeError("the finite-difference solver covers the local case beta = 1 only")
    if not spec.is_identity_chain():
        raise UnsupportedModeError("the solver supports d_i = d with B_i = Id only")
    if initial.has_time:
        raise InvalidParametersError("initial data must be a static field")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise InvalidParametersError("t_span must be increasing")
    if time_cells < 1:
        raise InvalidParametersError("time_cells must be >= 1")

    shape = initial.spatial_shape
    centers = initial.centers()
    h = [_uniform_width(e, a) for a, e in enumerate(initial.edges)]
    A = coefficient if coefficient is not None else initial.coefficient
    if A is None:
        A = np.broadcast_to(np.eye(spec.d0), shape + (spec.d0, spec.d0)).copy()
    S = source if source is not None else initial.source

    rate = stability_rate(spec, A, centers, h)
    horizon = t1 - t0
    if dt is None:
        n_steps = int(np.ceil(horizon * rate / (0.9 * settings.CFL_LIMIT)))
    else:
        n_steps = int(round(horizon / dt))
        if n_steps < 1 or abs(n_steps * dt - horizon) > 1e-9 * horizon:
            raise InvalidParametersError(f"dt={dt} does not divide the time span {horizon}")
    if record == "cells":
        # an even number of steps per time cell puts each snapshot at a cell mid-time
        block = 2 * time_cells
        n_steps = int(np.ceil(n_steps / block)) * block if dt is None else n_steps
        if n_steps % time_cells:
            raise InvalidParametersError(
                f"{n_steps} steps cannot be split into {time_cells} time cells"
            )
    step = horizon / n_steps
    cfl = step * rate
    if cfl > settings.CFL_LIMIT * (1.0 + 1e-12):
        suggested = 0.9 * settings.CFL_LIMIT / rate
        raise CFLViolationError(
            f"CFL number {cfl:.4g} exceeds {settings.CFL_LIMIT}; use dt <= {suggested:.4g}",
            suggested_dt=suggested,
        )

    modes = [boundary.for_layer(layer) for layer in _axis_layers(spec)]
    Ap = _pad_coefficient(A, modes)
    velocities = _transport_velocities(spec, centers)
    frozen = _pad(initial.values, [m if m != "dirichlet-frozen-inflow" else "edge" for m in modes])
    has_frozen = "dirichlet-frozen-inflow" in modes

    f = np.array(initial.values, dtype=float, copy=True)
    per_cell = n_steps // time_cells if record == "cells" else n_steps
    half, odd = divmod(per_cell, 2)
    snapshots, snapshot_times = [], []
    started = time.perf_counter()
    logger.info(
        "fd_solve start | shape=%s | steps=%d | dt=%.4g | cfl=%.3f | boundary=%s/%s",
        shape, n_steps, step, cfl, boundary.velocity, boundary.position,
    )
    for n in range(n_steps):
        fp = _pad(f, modes, frozen if has_frozen else None)
        rhs = diffusion_term(fp, Ap, spec.d0, h) - transport_term(fp, velocities, h)
        if S is not None:
            rhs = rhs + S
        prev = f
        f = f + step * rhs
        if not np.all(np.isfinite(f)):
            raise DivergenceError(f"non-finite values after step {n + 1} (t={t0 + (n + 1) * step:.6g})")
        if record != "cells":
            continue
        j = n % per_cell + 1
        if not odd and j == half:
            snapshots.append(f.copy())
            snapshot_times.append(t0 + (n + 1) * step)
        elif odd and j == half + 1:
            # the cell mid-time falls inside this step
            snapshots.append(0.5 * (prev + f))
            snapshot_times.append(t0 + (n + 0.5) * step)

    metadata = {
        "provenance": "fd_solve",
        "scheme": SCHEME_NAME,
        "dt": step,
        "n_steps": n_steps,
        "cfl_number": cfl,
        "boundary": boundary.model_dump(),
        "mass_initial": float(np.sum(initial.values * initial.spatial_volumes())),
        "mass_final": float(np.sum(f * initial.spatial_volumes())),
        "min_value": float(f.min()),
        "max_value": float(f.max()),
        "elapsed_seconds": time.perf_counter() - started,
    }
    if record == "final":
        metadata["time"] = t1
        return GridField(spec=spec, edges=initial.edges, values=f, coefficient=A, source=S, metadata=metadata)

    metadata["snapshot_times"] = snapshot_times
    return GridField(
        spec=spec,
        edges=initial.edges,
        values=np.stack(snapshots),
        time_edges=np.linspace(t0, t1, time_cells + 1),
        coefficient=A,
        source=S,
        metadata=metadata,
    )
