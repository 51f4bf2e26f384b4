"""
Command handlers. Each takes the parsed arguments and a RunOutputs writer;
errors propagate as KineticError subclasses and become exit codes in
``cli.app_factory.main``.
"""

import argparse
import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np
from pydantic import ValidationError

from data_models.control_basis import ControlBasis
from data_models.grid_field import BoundaryPolicy, GridConfig
from data_models.kinetic_system import KineticPoint, SystemSpec
from data_models.reports import PoincareReport
from data_utils.random_streams import named_stream
from data_utils.run_context import RunOutputs
from data_utils.serialization import format_float
from data_utils.settings import KineticSettings, get_settings
from data_utils.spec_loader import load_system_spec
from kinetic_tools.control_basis import build_basis, parse_alphas
from kinetic_tools.errors import (
    DegenerateBasisError,
    DivergenceError,
    InvalidParametersError,
    InvalidSpecError,
)
from kinetic_tools.trajectory import (
    bounding_radius,
    endpoint_residual,
    eval_path,
    sample_connection_pairs,
    singularity_slope,
    solve_control,
    tangent_length,
)
from kinetic_tools.wronskian import WronskianBundle
from kinetic_workers.coefficient_fields import rough_coefficient_sampler
from kinetic_workers.ensemble_runner import ensemble_estimate, ensure_supported
from kinetic_workers.fd_solver import fd_solve
from kinetic_workers.fixtures import gaussian_bump
from kinetic_workers.fundamental_solution import kolmogorov_covariance, transported_mean
from kinetic_workers.poincare_verifier import default_grid_config
from kinetic_workers.sde_simulator import ensemble_moments, sde_simulate

logger = logging.getLogger(__name__)

SOLVE_VELOCITY_VARIANCE = 0.25
SOLVE_POSITION_VARIANCE = 4.0


# =====================================================
# Shared helpers
# =====================================================
def _floats(text: str, flag: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InvalidParametersError(f"{flag}: cannot parse {text!r}") from exc
    if not values:
        raise InvalidParametersError(f"{flag} is empty")
    return values


def _ints(text: str, flag: str) -> List[int]:
    values = _floats(text, flag)
    if any(v != int(v) for v in values):
        raise InvalidParametersError(f"{flag} expects integers, got {text!r}")
    return [int(v) for v in values]


def coordinate_names(spec: SystemSpec) -> List[str]:
    """x{layer}_{component} in stacked order."""
    return [f"x{i}_{k}" for i, d in enumerate(spec.dims) for k in range(d)]


def _load_spec(args: argparse.Namespace, outputs: RunOutputs) -> SystemSpec:
    spec = load_system_spec(args.spec) if args.spec else SystemSpec.kolmogorov()
    outputs.manifest.spec = spec.to_document()
    return spec


def _basis(spec: SystemSpec, args: argparse.Namespace, settings: KineticSettings) -> ControlBasis:
    alphas = parse_alphas(args.alphas) if args.alphas else None
    return build_basis(spec.kappa, spec.beta, alphas, settings=settings)


def _draw_alphas(rng: np.random.Generator, kappa: int, attempts: int = 1000) -> List[float]:
    """Sorted exponents in (-0.95, -0.05) with a minimum gap, by rejection."""
    gap = min(0.08, 0.8 / (kappa + 1))
    for _ in range(attempts):
        a = np.sort(rng.uniform(-0.95, -0.05, size=kappa + 1))
        if np.min(np.diff(a)) >= gap:
            return [float(v) for v in a]
    return [float(v) for v in np.linspace(-0.9, -0.1, kappa + 1)]


# =====================================================
# check-wronskian
# =====================================================
def cmd_check_wronskian(args: argparse.Namespace, outputs: RunOutputs) -> None:
    settings = get_settings()
    spec = _load_spec(args, outputs)
    points = _floats(args.points, "--points")
    if any(not 0.0 < s <= 1.0 for s in points):
        raise InvalidParametersError("--points must lie in (0, 1]")
    if args.alphas:
        draws = [parse_alphas(args.alphas)]
    else:
        if args.trials < 1:
            raise InvalidParametersError("--trials must be >= 1")
        rng = named_stream(args.seed, "check-wronskian")
        draws = [_draw_alphas(rng, spec.kappa) for _ in range(args.trials)]

    rows, worst = [], 0.0
    for trial, alphas in enumerate(draws):
        basis = build_basis(spec.kappa, spec.beta, alphas, settings=settings)
        wb = WronskianBundle(spec, basis, 1.0, settings)
        for s in points:
            closed = wb.det_closed_form(s)
            numeric = wb.numeric_det(s)
            rel = abs(numeric - closed) / abs(closed)
            worst = max(worst, rel)
            rows.append([trial, s, closed, numeric, rel, ";".join(format_float(a) for a in alphas)])

    outputs.write_csv(
        "wronskian_check.csv",
        ["trial", "s", "det_closed_form", "det_numeric", "relative_error", "alphas"],
        rows,
    )
    passed = worst <= settings.DET_RELATIVE_TOLERANCE
    outputs.write_json(
        "wronskian_check.json",
        {
            "kappa": spec.kappa,
            "d0": spec.d0,
            "trials": len(draws),
            "points": points,
            "max_relative_error": worst,
            "tolerance": settings.DET_RELATIVE_TOLERANCE,
            "passed": passed,
        },
    )
    logger.info("Wronskian check | trials=%d | max relative error=%.3e", len(draws), worst)
    if not passed:
        raise DegenerateBasisError(
            f"determinant mismatch {worst:.3e} above {settings.DET_RELATIVE_TOLERANCE:.1e}"
        )


# =====================================================
# trajectory
# =====================================================
def _load_endpoints(path: str, spec: SystemSpec) -> Tuple[KineticPoint, KineticPoint]:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
        endpoint = KineticPoint.from_display(spec, document["endpoint"])
        target = KineticPoint.from_display(spec, document["target"])
    except FileNotFoundError as exc:
        raise InvalidSpecError(f"endpoints file not found: {path}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InvalidSpecError(f"malformed endpoints file {path}: {exc}") from exc
    return endpoint, target


def cmd_trajectory(args: argparse.Namespace, outputs: RunOutputs) -> None:
    settings = get_settings()
    spec = _load_spec(args, outputs)
    basis = _basis(spec, args, settings)
    if args.samples < 2:
        raise InvalidParametersError("--samples must be >= 2")
    if args.endpoints:
        z_end, z_0 = _load_endpoints(args.endpoints, spec)
    else:
        pairs = sample_connection_pairs(spec, None, 1, args.seed)
        z_end = KineticPoint.from_array(pairs["plus"][0, :-1], pairs["plus"][0, -1])
        z_0 = KineticPoint.from_array(pairs["zero"][0, :-1], pairs["zero"][0, -1])

    bundle = solve_control(spec, basis, z_end, z_0, method=args.method, settings=settings)
    s = np.linspace(0.0, 1.0, args.samples)
    path = eval_path(bundle, s)
    outputs.write_csv(
        "trajectory.csv",
        ["s", "t"] + coordinate_names(spec),
        [[s[k], path[k, -1], *path[k, :-1]] for k in range(len(s))],
    )

    slope = singularity_slope(bundle, settings)
    radius = bounding_radius(spec, basis, None, args.radius_samples, args.seed, settings=settings)
    layer_norms = {
        f"x{i}": float(np.max(np.linalg.norm(path[:, spec.layer_slice(i)], axis=1)))
        for i in range(spec.kappa + 1)
    }
    outputs.write_json(
        "trajectory_diagnostics.json",
        {
            "endpoint": z_end.display(spec),
            "target": z_0.display(spec),
            "delta": bundle.delta,
            "alphas": list(basis.alphas),
            "method": args.method or settings.SOLUTION_METHOD,
            "control": bundle.control,
            "boundary_residual": bundle.residual,
            "endpoint_residual": endpoint_residual(bundle),
            "tangent_length": tangent_length(bundle, settings),
            "max_layer_norms": layer_norms,
            "slope": asdict(slope),
            "bounding_radius": asdict(radius),
        },
    )


# =====================================================
# poincare
# =====================================================
def _grid_config(args: argparse.Namespace, spec: SystemSpec, settings: KineticSettings) -> GridConfig:
    if args.config:
        try:
            document = json.loads(Path(args.config).read_text(encoding="utf-8"))
            return GridConfig.model_validate(document)
        except FileNotFoundError as exc:
            raise InvalidSpecError(f"grid config not found: {args.config}") from exc
        except (json.JSONDecodeError, ValidationError) as exc:
            raise InvalidSpecError(f"malformed grid config {args.config}: {exc}") from exc
    cells = _ints(args.cells, "--cells") if args.cells else None
    config = default_grid_config(spec, cells, seed=args.seed, settings=settings)
    return GridConfig(**{**config.model_dump(), "dt": args.dt, "time_cells": args.time_cells})


def cmd_poincare(args: argparse.Namespace, outputs: RunOutputs) -> None:
    spec = _load_spec(args, outputs)
    ensure_supported(spec)
    settings = get_settings()
    if args.radius is not None:
        settings = settings.model_copy(update={"AMBIENT_RADIUS": args.radius})
    config = _grid_config(args, spec, settings)
    result = ensemble_estimate(
        spec, args.runs, args.lam, config, args.seed, args.p, args.preset, settings=settings
    )

    for report in result.reports:
        outputs.write_json(f"run_{report.provenance['run_id']:03d}.json", report.model_dump())
    outputs.write_csv("summary.csv", PoincareReport.CSV_HEADER, [r.csv_row() for r in result.reports])
    outputs.write_json(
        "ensemble_summary.json",
        {
            "summary": result.summary.model_dump(),
            "grid": config.model_dump(),
            "lambda": args.lam if args.lam is not None else spec.lambda_,
            "p": args.p,
            "preset": args.preset,
        },
    )
    outputs.manifest.details["run_wall_times"] = result.wall_times
    if result.summary.n_failed:
        raise DivergenceError(f"{result.summary.n_failed} of {args.runs} solver runs failed")


# =====================================================
# solve
# =====================================================
def cmd_solve(args: argparse.Namespace, outputs: RunOutputs) -> None:
    spec = _load_spec(args, outputs)
    ensure_supported(spec)
    settings = get_settings()
    t_span = _floats(args.t_span, "--t-span")
    if len(t_span) != 2:
        raise InvalidParametersError("--t-span expects start,end")
    config = GridConfig(
        half_widths=tuple(_floats(args.half_widths, "--half-widths")),
        cells=tuple(_ints(args.cells, "--cells")),
        t_span=tuple(t_span),
        dt=args.dt,
        time_cells=1,
        boundary=BoundaryPolicy(velocity=args.velocity_boundary, position=args.position_boundary),
    )
    edges = config.spatial_edges(spec)
    shape = tuple(len(e) - 1 for e in edges)
    lam = spec.lambda_ if args.lam is None else args.lam
    coefficient = rough_coefficient_sampler(
        spec, shape, args.seed, lam, tuple(min(8, n) for n in shape), args.preset
    )
    variances = np.full(spec.N, SOLVE_POSITION_VARIANCE)
    variances[: spec.d0] = SOLVE_VELOCITY_VARIANCE
    initial = gaussian_bump(spec, edges, np.zeros(spec.N), np.diag(variances))
    field = fd_solve(
        spec,
        initial,
        config.t_span,
        dt=config.dt,
        boundary=config.boundary,
        coefficient=coefficient,
        record="final",
        settings=settings,
    )

    points = field.cell_points()
    rows = np.column_stack([points, field.values.ravel()])
    outputs.write_csv("grid.csv", coordinate_names(spec) + ["t", "value"], rows)
    solver_record = {k: v for k, v in field.metadata.items() if k != "elapsed_seconds"}
    solver_record.update(
        {
            "grid_shape": list(shape),
            "half_widths": list(config.half_widths),
            "t_span": list(config.t_span),
            "seed": args.seed,
            "lambda": lam,
            "coefficient_preset": args.preset,
            "initial": {"mean": [0.0] * spec.N, "variances": variances},
        }
    )
    outputs.write_json("solver_manifest.json", solver_record)
    outputs.manifest.details["solver_elapsed_seconds"] = field.metadata["elapsed_seconds"]


# =====================================================
# simulate
# =====================================================
def cmd_simulate(args: argparse.Namespace, outputs: RunOutputs) -> None:
    spec = _load_spec(args, outputs)
    settings = get_settings()
    if args.dt is not None:
        dt = args.dt
    elif args.scheme == "exact" and args.horizon > 0:
        dt = args.horizon
    else:
        dt = args.horizon / 100.0 if args.horizon > 0 else 1.0
    ensemble = sde_simulate(
        spec, args.paths, dt, args.horizon, args.seed, args.scheme,
        diffusivity=args.diffusivity, settings=settings,
    )
    outputs.write_csv(
        "terminal.csv",
        ["path"] + coordinate_names(spec),
        [[i, *row] for i, row in enumerate(ensemble.terminal)],
    )

    moments = ensemble_moments(ensemble)
    layers = {}
    for i in range(spec.kappa + 1):
        sl = spec.layer_slice(i)
        layers[f"x{i}"] = {"mean": moments["mean"][sl], "covariance": moments["covariance"][sl, sl]}
    payload = {
        "n_paths": ensemble.n_paths,
        "horizon": ensemble.horizon,
        "dt": ensemble.dt,
        "scheme": ensemble.scheme,
        "diffusivity": ensemble.diffusivity,
        "mean": moments["mean"],
        "covariance": moments["covariance"],
        "covariance_standard_error": moments["covariance_standard_error"],
        "layers": layers,
    }
    if ensemble.horizon > 0:
        payload["expected_mean"] = transported_mean(spec, ensemble.start, ensemble.horizon)
        payload["expected_covariance"] = kolmogorov_covariance(spec, ensemble.horizon, ensemble.diffusivity)
    outputs.write_json("moments.json", payload)


HANDLERS: Dict[str, Callable[[argparse.Namespace, RunOutputs], None]] = {
    "check-wronskian": cmd_check_wronskian,
    "trajectory": cmd_trajectory,
    "poincare": cmd_poincare,
    "solve": cmd_solve,
    "simulate": cmd_simulate,
}
