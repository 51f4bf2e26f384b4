"""
Fields on tensor grids and Monte Carlo path ensembles.

Spatial axes follow the stacked coordinate order; when a field carries a
time axis it is the leading array axis.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import model_validator

from data_models.base import FrozenModel
from data_models.kinetic_system import SystemSpec
from kinetic_tools.errors import InvalidParametersError

BoundaryKind = Literal["periodic", "dirichlet-zero", "dirichlet-frozen-inflow"]


@dataclass(frozen=True)
class GridField:
    spec: SystemSpec
    edges: Tuple[np.ndarray, ...]
    values: np.ndarray
    time_edges: Optional[np.ndarray] = None
    coefficient: Optional[np.ndarray] = None
    source: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        shape = self.spatial_shape
        if len(self.edges) != self.spec.N:
            raise InvalidParametersError(
                f"need {self.spec.N} spatial axes, got {len(self.edges)}"
            )
        expected = shape if self.time_edges is None else (len(self.time_edges) - 1,) + shape
        if tuple(self.values.shape) != expected:
            raise InvalidParametersError(
                f"values shape {self.values.shape} does not match grid {expected}"
            )
        if self.coefficient is not None:
            d0 = self.spec.d0
            if tuple(self.coefficient.shape) != shape + (d0, d0):
                raise InvalidParametersError("coefficient must be a per-cell d0 x d0 field")
        if self.source is not None and tuple(self.source.shape) != shape:
            raise InvalidParametersError("source must be a per-cell spatial field")

    # -----------------------------------------------------------------
    # Geometry helpers
    # -----------------------------------------------------------------
    @property
    def spatial_shape(self) -> Tuple[int, ...]:
        return tuple(len(e) - 1 for e in self.edges)

    @property
    def has_time(self) -> bool:
        return self.time_edges is not None

    def centers(self) -> List[np.ndarray]:
        return [0.5 * (e[1:] + e[:-1]) for e in self.edges]

    def widths(self) -> List[np.ndarray]:
        return [np.diff(e) for e in self.edges]

    def time_centers(self) -> np.ndarray:
        if self.time_edges is None:
            raise InvalidParametersError("field has no time axis")
        return 0.5 * (self.time_edges[1:] + self.time_edges[:-1])

    def spatial_volumes(self) -> np.ndarray:
        vol = np.ones(self.spatial_shape)
        for axis, w in enumerate(self.widths()):
            shape = [1] * len(self.spatial_shape)
            shape[axis] = len(w)
            vol = vol * w.reshape(shape)
        return vol

    def cell_volumes(self) -> np.ndarray:
        """Space-time cell measures, same shape as ``values``."""
        vol = self.spatial_volumes()
        if self.time_edges is None:
            return vol
        dt = np.diff(self.time_edges)
        return dt.reshape((-1,) + (1,) * vol.ndim) * vol[None, ...]

    def cell_points(self) -> np.ndarray:
        """Cell centres as an (n_cells, N + 1) array ordered like ``values.ravel()``."""
        axes = self.centers()
        if self.time_edges is None:
            grids = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in grids], axis=1)
            t = np.full((pts.shape[0], 1), float(self.metadata.get("time", 0.0)))
            return np.hstack([pts, t])
        grids = np.meshgrid(self.time_centers(), *axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids[1:]], axis=1)
        return np.hstack([pts, grids[0].ravel()[:, None]])

    def snapshot(self, k: int) -> np.ndarray:
        if self.time_edges is None:
            return self.values
        return self.values[k]

    def with_values(self, values: np.ndarray, **changes) -> "GridField":
        kwargs = dict(
            spec=self.spec,
            edges=self.edges,
            values=values,
            time_edges=self.time_edges,
            coefficient=self.coefficient,
            source=self.source,
            metadata=dict(self.metadata),
        )
        kwargs.update(changes)
        return GridField(**kwargs)


@dataclass(frozen=True)
class PathEnsemble:
    """Terminal (and optionally recorded) states of simulated paths."""

    spec: SystemSpec
    terminal: np.ndarray
    horizon: float
    dt: float
    seed: int
    scheme: str
    recorded_times: Optional[np.ndarray] = None
    recorded: Optional[np.ndarray] = None
    start: Optional[np.ndarray] = None
    start_time: float = 0.0
    diffusivity: float = 0.5

    @property
    def n_paths(self) -> int:
        return int(self.terminal.shape[0])


class BoundaryPolicy(FrozenModel):
    """Boundary treatment for the velocity axes and the position layers."""

    velocity: BoundaryKind = "dirichlet-zero"
    position: BoundaryKind = "periodic"

    def for_layer(self, i: int) -> str:
        return self.velocity if i == 0 else self.position


class GridConfig(FrozenModel):
    """
    Box and resolution of a space-time grid. ``half_widths`` gives one
    half-width per layer (stacked order); the box is centred at the origin.
    """

    half_widths: Tuple[float, ...]
    cells: Tuple[int, ...]
    t_span: Tuple[float, float] = (-5.0, 0.0)
    dt: Optional[float] = None
    time_cells: int = 50
    boundary: BoundaryPolicy = BoundaryPolicy()

    @model_validator(mode="after")
    def _check(self) -> "GridConfig":
        if len(self.half_widths) != len(self.cells):
            raise InvalidParametersError("half_widths and cells must have one entry per layer")
        if any(h <= 0 for h in self.half_widths) or any(c < 2 for c in self.cells):
            raise InvalidParametersError("grid half-widths must be positive and cells >= 2")
        if not self.t_span[0] < self.t_span[1]:
            raise InvalidParametersError("t_span must be increasing")
        if self.time_cells < 1:
            raise InvalidParametersError("time_cells must be >= 1")
        if self.dt is not None and self.dt <= 0:
            raise InvalidParametersError("dt must be positive")
        return self

    def spatial_edges(self, spec: SystemSpec) -> Tuple[np.ndarray, ...]:
        if len(self.cells) != spec.kappa + 1:
            raise InvalidParametersError("grid config needs one entry per layer")
        edges = []
        for i, d in enumerate(spec.dims):
            for _ in range(d):
                h = self.half_widths[i]
                edges.append(np.linspace(-h, h, self.cells[i] + 1))
        return tuple(edges)
