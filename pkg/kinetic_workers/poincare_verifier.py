"""
Both sides of the kinetic Poincare inequality

    || (f - <f>_{Q-})_+ ||_{L^p(Q+)}^p   vs   || sqrt(A) grad_v f ||_{L^p(ambient)}^p

evaluated on grid fields with the midpoint rule. Cylinder integrals use
cell-centre membership: a cell counts fully when its centre lies inside.
"""

import logging
from math import ceil
from typing import Dict, List, Optional, Sequence

import numpy as np

from data_models.grid_field import GridConfig, GridField
from data_models.kinetic_system import Cylinder, LayoutConfig, SystemSpec
from data_models.reports import PoincareReport
from data_utils.settings import KineticSettings, resolve_settings
from kinetic_tools.control_basis import build_basis
from kinetic_tools.errors import GeometryError, InvalidParametersError
from kinetic_tools.geometry import ambient_cylinder, cylinder_contains_array, cylinder_layout
from kinetic_tools.trajectory import bounding_radius

logger = logging.getLogger(__name__)

VELOCITY_CELL_WIDTH = 0.25
POSITION_CELL_WIDTH = 0.5
MAX_DEFAULT_CELLS = 256


def cylinder_mask(field: GridField, cyl: Cylinder) -> np.ndarray:
    """Boolean array shaped like ``field.values``: cells whose centre lies in ``cyl``."""
    inside = cylinder_contains_array(field.spec, cyl, field.cell_points())
    return inside.reshape(field.values.shape)


def past_average(field: GridField, Q_minus: Cylinder) -> float:
    mask = cylinder_mask(field, Q_minus)
    if not mask.any():
        raise GeometryError(f"no grid cell centre lies in {Q_minus.label or 'the past cylinder'}")
    vol = field.cell_volumes() * mask
    return float(np.sum(field.values * vol) / np.sum(vol))


def lhs_poincare(field: GridField, Q_plus: Cylinder, Q_minus: Cylinder, p: float = 1.0) -> float:
    """Integral over Q+ of ((f - past average)_+)^p."""
    if p < 1:
        raise InvalidParametersError(f"p must be >= 1, got {p}")
    mask = cylinder_mask(field, Q_plus)
    if not mask.any():
        raise GeometryError(f"no grid cell centre lies in {Q_plus.label or 'the future cylinder'}")
    excess = np.clip(field.values - past_average(field, Q_minus), 0.0, None)
    return float(np.sum(excess ** p * field.cell_volumes() * mask))


def velocity_gradient(field: GridField) -> np.ndarray:
    """Centred differences of f along the velocity axes, stacked on a trailing axis."""
    shift = 1 if field.has_time else 0
    centers = field.centers()
    parts = [
        np.gradient(field.values, centers[k], axis=k + shift)
        for k in range(field.spec.d0)
    ]
    return np.stack(parts, axis=-1)


def weighted_gradient_norm(field: GridField) -> np.ndarray:
    """|sqrt(A) grad_v f| = sqrt(g^T A g) per cell; A = Id when no coefficient is attached."""
    g = velocity_gradient(field)
    if field.coefficient is None:
        return np.linalg.norm(g, axis=-1)
    quad = np.einsum("...i,...ij,...j->...", g, field.coefficient, g)
    return np.sqrt(np.clip(quad, 0.0, None))


def rhs_poincare(
    field: GridField,
    ambient: Optional[Cylinder] = None,
    p: float = 1.0,
    include_source: bool = True,
) -> float:
    """
    Integral of |sqrt(A) grad_v f|^p over the ambient cylinder (the whole
    grid when ``ambient`` is None), plus the L1 norm of an attached source.
    """
    if p < 1:
        raise InvalidParametersError(f"p must be >= 1, got {p}")
    vol = field.cell_volumes()
    if ambient is not None:
        vol = vol * cylinder_mask(field, ambient)
    total = float(np.sum(weighted_gradient_norm(field) ** p * vol))
    if include_source and field.source is not None:
        total += float(np.sum(np.abs(field.source) * vol))
    return total


def _describe(cyl: Optional[Cylinder]) -> Optional[dict]:
    return None if cyl is None else cyl.model_dump()


def poincare_report(
    field: GridField,
    cylinders: Optional[Dict[str, Cylinder]] = None,
    ambient: Optional[Cylinder] = None,
    p: float = 1.0,
    include_source: bool = True,
    provenance: Optional[dict] = None,
    settings: Optional[KineticSettings] = None,
) -> PoincareReport:
    settings = resolve_settings(settings)
    cylinders = cylinders or cylinder_layout(field.spec)
    lhs = lhs_poincare(field, cylinders["plus"], cylinders["minus"], p)
    rhs = rhs_poincare(field, ambient, p, include_source)
    defined = rhs > settings.RHS_FLOOR
    ratio = lhs / rhs if defined else None
    if ratio is not None and ratio > settings.RATIO_CEILING:
        logger.warning("Poincare ratio %.4g exceeds ceiling %.4g", ratio, settings.RATIO_CEILING)
    geometry = {name: _describe(cyl) for name, cyl in cylinders.items()}
    geometry["ambient"] = _describe(ambient)
    geometry["ambient_radius"] = None if ambient is None else ambient.radius
    return PoincareReport(
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        ratio_defined=defined,
        p=p,
        geometry=geometry,
        provenance=dict(provenance or field.metadata.get("provenance_record", {})),
    )


def ratio_radius_sweep(
    field: GridField,
    radii: Sequence[float],
    cylinders: Optional[Dict[str, Cylinder]] = None,
    p: float = 1.0,
    settings: Optional[KineticSettings] = None,
) -> List[dict]:
    """lhs, rhs and ratio for ambient cylinders of each radius."""
    settings = resolve_settings(settings)
    cylinders = cylinders or cylinder_layout(field.spec)
    lhs = lhs_poincare(field, cylinders["plus"], cylinders["minus"], p)
    rows = []
    for radius in radii:
        rhs = rhs_poincare(field, ambient_cylinder(field.spec, radius), p)
        defined = rhs > settings.RHS_FLOOR
        rows.append({"radius": float(radius), "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if defined else None})
    return rows


def default_grid_config(
    spec: SystemSpec,
    cells: Optional[Sequence[int]] = None,
    layout: Optional[LayoutConfig] = None,
    n_samples: int = 64,
    seed: int = 0,
    settings: Optional[KineticSettings] = None,
) -> GridConfig:
    """
    Box of half-width R^(1 + 2i) on layer i, R the empirical bounding
    radius rounded up and capped at AMBIENT_RADIUS_CAP (or AMBIENT_RADIUS
    when set). The time span covers the whole layout.
    """
    settings = resolve_settings(settings)
    layout = layout or LayoutConfig()
    if settings.AMBIENT_RADIUS is not None:
        radius = float(settings.AMBIENT_RADIUS)
    else:
        basis = build_basis(spec.kappa, spec.beta, settings=settings)
        estimate = bounding_radius(spec, basis, layout, n_samples, seed, settings=settings)
        radius = float(min(ceil(estimate.radius), settings.AMBIENT_RADIUS_CAP))
        logger.info("Ambient radius %.3g (empirical %.4g)", radius, estimate.radius)
    radius = max(radius, 1.0)
    half_widths = tuple(radius ** (1.0 + 2.0 * i * spec.beta) for i in range(spec.kappa + 1))
    if cells is None:
        # even counts keep cell centres off the origin and inside the unit balls
        cells = tuple(
            min(max(16, 2 * ceil(hw / target)), MAX_DEFAULT_CELLS)
            for hw, target in zip(half_widths, (VELOCITY_CELL_WIDTH,) + (POSITION_CELL_WIDTH,) * spec.kappa)
        )
    t_lo = layout.minus_top - layout.window
    return GridConfig(half_widths=half_widths, cells=cells, t_span=(t_lo, 0.0))
