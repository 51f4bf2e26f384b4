"""
Monte Carlo simulation of the Kolmogorov process

    dV = sqrt(2a) dW,   dX^(i) = B_i X^(i-1) dt,

whose law solves the constant-coefficient equation with diffusivity a
(a = 1/2 gives Var V(t) = t).

Paths are simulated in chunks; chunk c draws from its own Philox stream
spawned from the run seed, so results do not depend on the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np

from data_models.grid_field import GridField, PathEnsemble
from data_models.kinetic_system import KineticPoint, SystemSpec
from data_utils.random_streams import spawn_streams
from data_utils.settings import KineticSettings, resolve_settings
from kinetic_tools.errors import InvalidParametersError
from kinetic_tools.geometry import exp_tB, stacked_B
from kinetic_workers.fundamental_solution import (
    PROCESS_DIFFUSIVITY,
    cell_average_density,
    kolmogorov_covariance,
)

logger = logging.getLogger(__name__)

Scheme = Literal["exact", "euler-maruyama"]

# Global executor for chunked path simulation
_DEFAULT_EXECUTOR = ThreadPoolExecutor(max_workers=4)


def _step_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # tiny steps at large kappa leave cov numerically semi-definite
        w, q = np.linalg.eigh(0.5 * (cov + cov.T))
        return q * np.sqrt(np.clip(w, 0.0, None))[None, :]


def _simulate_chunk(
    rng: np.random.Generator,
    n: int,
    start: np.ndarray,
    n_steps: int,
    transition: np.ndarray,
    noise: np.ndarray,
    record_every: Optional[int],
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Core loop for one chunk. Each step is x <- x T^T + xi L^T with xi
    standard normal of width L.shape[1].
    """
    x = np.broadcast_to(start, (n, start.shape[0])).copy()
    frames = [] if record_every else None
    for k in range(n_steps):
        xi = rng.standard_normal((n, noise.shape[1]))
        x = x @ transition.T + xi @ noise.T
        if record_every and (k + 1) % record_every == 0:
            frames.append(x.copy())
    return x, (np.stack(frames) if frames else None)


def _scheme_matrices(
    spec: SystemSpec, scheme: str, step: float, diffusivity: float
) -> Tuple[np.ndarray, np.ndarray]:
    if scheme == "exact":
        return exp_tB(spec, step), _step_factor(kolmogorov_covariance(spec, step, diffusivity))
    if scheme == "euler-maruyama":
        noise = np.zeros((spec.N, spec.d0))
        noise[: spec.d0, :] = np.sqrt(2.0 * diffusivity * step) * np.eye(spec.d0)
        return np.eye(spec.N) + step * stacked_B(spec), noise
    raise InvalidParametersError(f"unknown scheme {scheme!r}")


def sde_simulate(
    spec: SystemSpec,
    n_paths: int,
    dt: float,
    horizon: float,
    seed: int,
    scheme: Scheme = "exact",
    start: Optional[KineticPoint] = None,
    diffusivity: float = PROCESS_DIFFUSIVITY,
    record_every: Optional[int] = None,
    executor: Optional[ThreadPoolExecutor] = None,
    settings: Optional[KineticSettings] = None,
) -> PathEnsemble:
    """
    Simulate ``n_paths`` paths from ``start`` (default the origin) over
    ``horizon``. ``dt`` is rounded down so the steps tile the horizon.
    """
    settings = resolve_settings(settings)
    if n_paths < 1:
        raise InvalidParametersError("n_paths must be >= 1")
    if horizon < 0:
        raise InvalidParametersError("horizon must be non-negative")
    if not dt > 0:
        raise InvalidParametersError("dt must be positive")
    if record_every is not None and record_every < 1:
        raise InvalidParametersError("record_every must be >= 1")
    start = start or KineticPoint.origin(spec)
    x0 = start.vector

    if horizon == 0:
        return PathEnsemble(
            spec=spec, terminal=np.tile(x0, (n_paths, 1)), horizon=0.0, dt=dt, seed=seed,
            scheme=scheme, start=x0, start_time=start.t, diffusivity=diffusivity,
        )

    n_steps = int(np.ceil(horizon / dt - 1e-12))
    step = horizon / n_steps
    transition, noise = _scheme_matrices(spec, scheme, step, diffusivity)

    chunk = settings.SDE_CHUNK_SIZE
    sizes = [min(chunk, n_paths - c) for c in range(0, n_paths, chunk)]
    streams = spawn_streams(seed, "sde-paths", len(sizes))
    logger.info(
        "sde_simulate | scheme=%s | paths=%d | steps=%d | dt=%.4g | chunks=%d",
        scheme, n_paths, n_steps, step, len(sizes),
    )

    work = partial(
        _simulate_chunk,
        start=x0,
        n_steps=n_steps,
        transition=transition,
        noise=noise,
        record_every=record_every,
    )
    actual_executor = executor or _DEFAULT_EXECUTOR
    # map preserves chunk order
    results = list(actual_executor.map(lambda args: work(*args), zip(streams, sizes)))

    terminal = np.concatenate([r[0] for r in results], axis=0)
    recorded, recorded_times = None, None
    if record_every:
        recorded = np.concatenate([r[1] for r in results], axis=1)
        recorded_times = start.t + step * np.arange(record_every, n_steps + 1, record_every)
    return PathEnsemble(
        spec=spec,
        terminal=terminal,
        horizon=float(horizon),
        dt=step,
        seed=seed,
        scheme=scheme,
        recorded_times=recorded_times,
        recorded=recorded,
        start=x0,
        start_time=start.t,
        diffusivity=diffusivity,
    )


# =====================================================
# Estimators
# =====================================================
def empirical_density(ensemble: PathEnsemble, edges: Sequence[np.ndarray]) -> GridField:
    """Histogram normalised by the total path count (mass outside the box is lost)."""
    edges = tuple(np.asarray(e, dtype=float) for e in edges)
    counts, _ = np.histogramdd(ensemble.terminal, bins=edges)
    field = GridField(spec=ensemble.spec, edges=edges, values=counts, metadata={})
    values = counts / (ensemble.n_paths * field.spatial_volumes())
    return field.with_values(
        values,
        metadata={
            "time": ensemble.start_time + ensemble.horizon,
            "provenance": f"sde-{ensemble.scheme}",
            "n_paths": ensemble.n_paths,
            "seed": ensemble.seed,
        },
    )


def ensemble_moments(ensemble: PathEnsemble) -> Dict[str, np.ndarray]:
    """
    Sample mean and covariance of the terminal states, with Gaussian
    standard errors sqrt((S_ii S_jj + S_ij^2) / n) for the covariance.
    """
    x = ensemble.terminal
    n = x.shape[0]
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False).reshape(x.shape[1], x.shape[1]) if n > 1 else np.zeros((x.shape[1],) * 2)
    diag = np.diag(cov)
    cov_se = np.sqrt((np.outer(diag, diag) + cov ** 2) / max(n, 1))
    return {
        "mean": mean,
        "mean_standard_error": np.sqrt(diag / max(n, 1)),
        "covariance": cov,
        "covariance_standard_error": cov_se,
    }


def density_l1_error(
    ensemble: PathEnsemble,
    edges: Sequence[np.ndarray],
    mean: np.ndarray,
    cov: np.ndarray,
) -> float:
    """L1 distance on the box between the histogram and the cell-averaged Gaussian."""
    hist = empirical_density(ensemble, edges)
    exact = cell_average_density(mean, cov, hist.edges)
    return float(np.sum(np.abs(hist.values - exact) * hist.spatial_volumes()))
