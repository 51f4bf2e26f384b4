"""Analytic grid fields used as solver inputs and as verifier test cases."""

from typing import Callable, Optional, Sequence

import numpy as np

from data_models.grid_field import GridField
from data_models.kinetic_system import SystemSpec
from kinetic_workers.fundamental_solution import gaussian_density


def _mesh(edges: Sequence[np.ndarray]) -> list:
    centers = [0.5 * (e[1:] + e[:-1]) for e in edges]
    return np.meshgrid(*centers, indexing="ij")


def gaussian_bump(
    spec: SystemSpec,
    edges: Sequence[np.ndarray],
    mean: Sequence[float],
    cov: np.ndarray,
    scale: float = 1.0,
) -> GridField:
    grids = _mesh(edges)
    pts = np.stack([g.ravel() for g in grids], axis=1)
    values = scale * gaussian_density(np.asarray(mean, dtype=float), np.asarray(cov, dtype=float), pts)
    return GridField(
        spec=spec,
        edges=tuple(edges),
        values=values.reshape(grids[0].shape),
        metadata={"provenance": "gaussian-bump"},
    )


def constant_field(spec: SystemSpec, edges: Sequence[np.ndarray], value: float = 1.0) -> GridField:
    shape = tuple(len(e) - 1 for e in edges)
    return GridField(spec=spec, edges=tuple(edges), values=np.full(shape, float(value)),
                     metadata={"provenance": "constant"})


def field_from_function(
    spec: SystemSpec,
    edges: Sequence[np.ndarray],
    time_edges: np.ndarray,
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    coefficient: Optional[np.ndarray] = None,
    provenance: str = "analytic",
) -> GridField:
    """
    Sample func(x, t) at space-time cell centres. ``func`` receives an
    (n, N) array of stacked points and an (n,) array of times.
    """
    time_edges = np.asarray(time_edges, dtype=float)
    t_centers = 0.5 * (time_edges[1:] + time_edges[:-1])
    grids = _mesh(edges)
    pts = np.stack([g.ravel() for g in grids], axis=1)
    values = np.empty((len(t_centers),) + grids[0].shape)
    for k, t in enumerate(t_centers):
        values[k] = np.asarray(func(pts, np.full(len(pts), t)), dtype=float).reshape(grids[0].shape)
    return GridField(
        spec=spec,
        edges=tuple(edges),
        values=values,
        time_edges=time_edges,
        coefficient=coefficient,
        metadata={"provenance": provenance},
    )


def indicator_in_time_field(
    spec: SystemSpec,
    edges: Sequence[np.ndarray],
    time_edges: np.ndarray,
    t_star: float,
) -> GridField:
    """f(x, t) = 1 for t <= t_star, else 0; a sub-solution of the equation."""
    return field_from_function(
        spec,
        edges,
        time_edges,
        lambda pts, t: (t <= t_star).astype(float),
        provenance=f"indicator(t <= {t_star})",
    )
