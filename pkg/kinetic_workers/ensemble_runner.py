import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Literal, Optional, Tuple

import numpy as np

from data_models.grid_field import GridConfig, GridField
from data_models.kinetic_system import LayoutConfig, SystemSpec
from data_models.reports import EnsembleResult, EnsembleSummary, PoincareReport
from data_utils.random_streams import named_stream, spawn_seeds
from data_utils.settings import KineticSettings, get_settings, resolve_settings
from kinetic_tools.errors import InvalidParametersError, KineticError, UnsupportedModeError
from kinetic_tools.geometry import ambient_cylinder, cylinder_layout, exp_tB
from kinetic_workers.coefficient_fields import rough_coefficient_sampler
from kinetic_workers.fd_solver import fd_solve
from kinetic_workers.fixtures import gaussian_bump
from kinetic_workers.poincare_verifier import default_grid_config, poincare_report

logger = logging.getLogger(__name__)

# Global executor for independent ensemble runs
_DEFAULT_EXECUTOR = ThreadPoolExecutor(max_workers=get_settings().ENSEMBLE_WORKERS)

COEFFICIENT_BLOCKS = 8
VELOCITY_VARIANCE = 0.25
POSITION_VARIANCE = 1.0
ARRIVAL_FRACTION = 0.9


def ensure_supported(spec: SystemSpec) -> None:
    if spec.beta != 1.0:
        raise UnsupportedModeError(
            f"beta={spec.beta}: the fractional equation is outside this tool; only beta = 1 is solved"
        )
    if not spec.is_identity_chain():
        raise UnsupportedModeError("the solver supports d_i = d with B_i = Id only")


def initial_bump(spec: SystemSpec, edges, t_span: Tuple[float, float], run_seed: int) -> GridField:
    """
    Gaussian bump at t_span[0] whose centre is carried by the free
    transport onto a random target near the origin shortly before t_span[1].
    """
    rng = named_stream(run_seed, "initial-bump")
    target = rng.normal(0.0, 0.5, size=spec.N)
    target[: spec.d0] = rng.uniform(-0.75, 0.75, size=spec.d0)
    travel = ARRIVAL_FRACTION * (t_span[1] - t_span[0])
    mean = exp_tB(spec, -travel) @ target
    variances = np.full(spec.N, POSITION_VARIANCE)
    variances[: spec.d0] = VELOCITY_VARIANCE
    return gaussian_bump(spec, edges, mean, np.diag(variances))


def _execute_run(
    run_id: int,
    run_seed: int,
    spec: SystemSpec,
    config: GridConfig,
    lam: float,
    p: float,
    preset: str,
    cylinders: dict,
    settings: KineticSettings,
) -> Tuple[int, Optional[PoincareReport], Optional[str], float]:
    """
    Core logic of one run: rough coefficient, solve, both sides of the
    inequality. Numerical failures are returned, not raised.
    """
    started = time.perf_counter()
    logger.info("Starting ensemble run %d | seed=%d | lambda=%s", run_id, run_seed, lam)
    try:
        edges = config.spatial_edges(spec)
        shape = tuple(len(e) - 1 for e in edges)
        block_shape = tuple(min(COEFFICIENT_BLOCKS, n) for n in shape)
        coefficient = rough_coefficient_sampler(spec, shape, run_seed, lam, block_shape, preset)
        initial = initial_bump(spec, edges, config.t_span, run_seed)
        field = fd_solve(
            spec,
            initial,
            config.t_span,
            dt=config.dt,
            boundary=config.boundary,
            coefficient=coefficient,
            time_cells=config.time_cells,
            settings=settings,
        )
        provenance = {
            "run_id": run_id,
            "seed": run_seed,
            "lambda": lam,
            "kappa": spec.kappa,
            "grid": "x".join(str(n) for n in shape),
            "scheme": field.metadata["scheme"],
            "dt": field.metadata["dt"],
            "n_steps": field.metadata["n_steps"],
            "cfl_number": field.metadata["cfl_number"],
            "coefficient_preset": preset,
        }
        ambient = ambient_cylinder(spec, config.half_widths[0])
        report = poincare_report(field, cylinders, ambient, p, provenance=provenance, settings=settings)
    except UnsupportedModeError:
        raise
    except KineticError as exc:
        logger.warning("Ensemble run %d failed: %s", run_id, exc)
        return run_id, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - started
    return run_id, report, None, time.perf_counter() - started


def summarize(
    n_runs: int,
    reports: Dict[int, PoincareReport],
    failures: Dict[int, str],
    settings: Optional[KineticSettings] = None,
) -> EnsembleSummary:
    settings = resolve_settings(settings)
    ratios = {rid: r.ratio for rid, r in reports.items() if r.ratio_defined}
    values = np.array(list(ratios.values()), dtype=float)
    return EnsembleSummary(
        n_runs=n_runs,
        n_completed=len(reports),
        n_failed=len(failures),
        n_undefined_ratio=len(reports) - len(ratios),
        max_ratio=float(values.max()) if values.size else None,
        median_ratio=float(np.median(values)) if values.size else None,
        flagged_runs=sorted(rid for rid, v in ratios.items() if v > settings.RATIO_CEILING),
        failures=dict(sorted(failures.items())),
    )


def ensemble_estimate(
    spec: SystemSpec,
    n_runs: int,
    lam: Optional[float] = None,
    config: Optional[GridConfig] = None,
    seed: int = 0,
    p: float = 1.0,
    preset: Literal["random", "checkerboard", "identity"] = "random",
    layout: Optional[LayoutConfig] = None,
    executor: Optional[ThreadPoolExecutor] = None,
    settings: Optional[KineticSettings] = None,
) -> EnsembleResult:
    """
    Run ``n_runs`` independent rough-coefficient solves and report the
    Poincare ratio of each. Run i uses the i-th seed spawned from ``seed``,
    so the result does not depend on scheduling.
    """
    settings = resolve_settings(settings)
    ensure_supported(spec)
    if n_runs < 1:
        raise InvalidParametersError("n_runs must be >= 1")
    lam = spec.lambda_ if lam is None else float(lam)
    config = config or default_grid_config(spec, layout=layout, seed=seed, settings=settings)
    cylinders = cylinder_layout(spec, layout)
    seeds = spawn_seeds(seed, "ensemble-runs", n_runs)

    actual_executor = executor or _DEFAULT_EXECUTOR
    logger.info("Offloading %d ensemble runs to thread pool...", n_runs)
    futures = [
        actual_executor.submit(
            _execute_run, run_id, run_seed, spec, config, lam, p, preset, cylinders, settings
        )
        for run_id, run_seed in enumerate(seeds)
    ]
    reports: Dict[int, PoincareReport] = {}
    failures: Dict[int, str] = {}
    wall_times: Dict[int, float] = {}
    for future in futures:
        run_id, report, error, wall = future.result()
        wall_times[run_id] = wall
        if report is None:
            failures[run_id] = error
        else:
            reports[run_id] = report

    summary = summarize(n_runs, reports, failures, settings)
    logger.info(
        "Ensemble finished | completed=%d | failed=%d | max ratio=%s",
        summary.n_completed, summary.n_failed, summary.max_ratio,
    )
    return EnsembleResult(
        reports=[reports[rid] for rid in sorted(reports)],
        summary=summary,
        wall_times=wall_times,
    )
