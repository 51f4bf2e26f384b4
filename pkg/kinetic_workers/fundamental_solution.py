"""
Gaussian kernel of the constant-coefficient equation
d_t f + (Bx).grad_x f = a Delta_v f.

For a point started at x_s the law after time tau is
N(exp(tau B) x_s, 2a K(tau)), where K(tau) = int_0^tau e^{uB} E E^T e^{uB^T} du
is the controllability Gramian of (B, E), E the injection of the velocity
layer. B is nilpotent, so K is a finite sum and exact.

a = 1/2 matches the process dV = dW, dX^(i) = B_i X^(i-1) dt; a = 1 matches
the equation with A = Id.
"""

import logging
from math import factorial
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import multivariate_normal

from data_models.grid_field import GridField
from data_models.kinetic_system import KineticPoint, SystemSpec
from kinetic_tools.errors import InvalidParametersError
from kinetic_tools.geometry import exp_tB, stacked_B

logger = logging.getLogger(__name__)

PROCESS_DIFFUSIVITY = 0.5


def _injection(spec: SystemSpec) -> np.ndarray:
    E = np.zeros((spec.N, spec.d0))
    E[: spec.d0, :] = np.eye(spec.d0)
    return E


def kolmogorov_covariance(spec: SystemSpec, tau: float, diffusivity: float = PROCESS_DIFFUSIVITY) -> np.ndarray:
    """2a K(tau) in stacked order."""
    if not tau > 0:
        raise InvalidParametersError(f"elapsed time must be positive, got {tau}")
    if not diffusivity > 0:
        raise InvalidParametersError("diffusivity must be positive")
    B = stacked_B(spec)
    E = _injection(spec)
    powers = [E]
    for _ in range(spec.kappa):
        powers.append(B @ powers[-1])
    K = np.zeros((spec.N, spec.N))
    for m, Pm in enumerate(powers):
        for n, Pn in enumerate(powers):
            coeff = tau ** (m + n + 1) / ((m + n + 1) * factorial(m) * factorial(n))
            K += coeff * (Pm @ Pn.T)
    return 2.0 * diffusivity * K


def transported_mean(spec: SystemSpec, x_source: np.ndarray, tau: float) -> np.ndarray:
    return exp_tB(spec, tau) @ np.asarray(x_source, dtype=float)


def evolve_gaussian(
    spec: SystemSpec,
    mean: np.ndarray,
    cov: np.ndarray,
    tau: float,
    diffusivity: float = PROCESS_DIFFUSIVITY,
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and covariance after tau of a Gaussian initial density (exact convolution)."""
    E = exp_tB(spec, tau)
    return E @ np.asarray(mean, dtype=float), E @ np.asarray(cov, dtype=float) @ E.T + kolmogorov_covariance(
        spec, tau, diffusivity
    )


def fundamental_solution(
    spec: SystemSpec,
    z_source: KineticPoint,
    z_query: KineticPoint,
    diffusivity: float = PROCESS_DIFFUSIVITY,
) -> float:
    """Density at z_query of the process started at z_source. Batched form: ``density_at``."""
    tau = z_query.t - z_source.t
    return float(density_at(spec, z_source.vector, tau, z_query.vector[None, :], diffusivity)[0])


def density_at(
    spec: SystemSpec,
    x_source: Sequence[float],
    tau: float,
    points: np.ndarray,
    diffusivity: float = PROCESS_DIFFUSIVITY,
) -> np.ndarray:
    """Kernel density at each row of ``points`` (stacked spatial coordinates)."""
    if not tau > 0:
        raise InvalidParametersError(f"elapsed time must be positive, got {tau}")
    mean = transported_mean(spec, x_source, tau)
    cov = kolmogorov_covariance(spec, tau, diffusivity)
    return np.atleast_1d(multivariate_normal(mean=mean, cov=cov).pdf(np.atleast_2d(points)))


def gaussian_density(mean: np.ndarray, cov: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.atleast_1d(multivariate_normal(mean=mean, cov=cov).pdf(np.atleast_2d(points)))


def cell_average_density(
    mean: np.ndarray,
    cov: np.ndarray,
    edges: Sequence[np.ndarray],
    nodes_per_axis: int = 4,
) -> np.ndarray:
    """
    Average of a Gaussian density over every cell of a tensor grid, by a
    Gauss-Legendre product rule inside each cell.
    """
    x, w = np.polynomial.legendre.leggauss(nodes_per_axis)
    axis_pts, axis_wts = [], []
    for e in edges:
        lo, hi = e[:-1], e[1:]
        half = 0.5 * (hi - lo)
        axis_pts.append((lo[:, None] + half[:, None] * (1.0 + x[None, :])).ravel())
        axis_wts.append(np.tile(0.5 * w, len(lo)))
    grids = np.meshgrid(*axis_pts, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    dens = gaussian_density(mean, cov, pts).reshape([len(p) for p in axis_pts])
    for axis, wts in enumerate(axis_wts):
        shape = [1] * dens.ndim
        shape[axis] = len(wts)
        dens = dens * wts.reshape(shape)
    # sum the sub-node weights back into cells
    cells = [len(e) - 1 for e in edges]
    new_shape = []
    for c in cells:
        new_shape.extend([c, nodes_per_axis])
    dens = dens.reshape(new_shape)
    return dens.sum(axis=tuple(range(1, 2 * len(cells), 2)))


def fundamental_solution_grid(
    spec: SystemSpec,
    z_source: KineticPoint,
    t_query: float,
    edges: Sequence[np.ndarray],
    diffusivity: float = PROCESS_DIFFUSIVITY,
    cell_averaged: bool = False,
) -> GridField:
    tau = t_query - z_source.t
    mean = transported_mean(spec, z_source.vector, tau)
    cov = kolmogorov_covariance(spec, tau, diffusivity)
    edges = tuple(np.asarray(e, dtype=float) for e in edges)
    if cell_averaged:
        values = cell_average_density(mean, cov, edges)
    else:
        centers = [0.5 * (e[1:] + e[:-1]) for e in edges]
        grids = np.meshgrid(*centers, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        values = gaussian_density(mean, cov, pts).reshape([len(c) for c in centers])
    return GridField(
        spec=spec,
        edges=edges,
        values=values,
        metadata={"time": float(t_query), "provenance": "analytic", "diffusivity": diffusivity},
    )
