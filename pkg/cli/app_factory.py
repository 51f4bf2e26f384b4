import argparse
import logging
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from main_configs import DEFAULT_OUTPUT_DIR, DEFAULT_SEED, DEFAULT_SPEC_PATH, TOOL_DESCRIPTION, TOOL_NAME, TOOL_VERSION
from cli.handlers import HANDLERS
from data_models.reports import RunManifest
from data_utils.run_context import exit_code_for, get_run_context
from kinetic_tools.errors import KineticError

logger = logging.getLogger(__name__)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", default=DEFAULT_SPEC_PATH,
                        help="SystemSpec JSON file (default: kappa=1, d=1 Kolmogorov)")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="root seed for every random stream")
    parser.add_argument("--out", default=None, help="output directory (default: <output dir>/<command>)")
    parser.add_argument("--alphas", default=None, help="comma separated control exponents in (-1, 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL_NAME, description=TOOL_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    # -------------------------
    # check-wronskian
    # -------------------------
    p = sub.add_parser("check-wronskian", help="closed-form vs numeric Wronskian determinants")
    _common(p)
    p.add_argument("--trials", type=int, default=20, help="random exponent draws (ignored with --alphas)")
    p.add_argument("--points", default="1.0,0.5,0.1,0.01", help="comma separated s values")

    # -------------------------
    # trajectory
    # -------------------------
    p = sub.add_parser("trajectory", help="sample one controlled trajectory")
    _common(p)
    p.add_argument("--endpoints", default=None,
                   help='JSON {"endpoint": [...], "target": [...]} in display order; '
                        "default: random pair from Q+ and Q0")
    p.add_argument("--samples", type=int, default=101, help="number of s values on [0, 1]")
    p.add_argument("--radius-samples", type=int, default=50, help="endpoint pairs for the bounding radius")
    p.add_argument("--method", choices=["factored", "min-norm"], default=None)

    # -------------------------
    # poincare
    # -------------------------
    p = sub.add_parser("poincare", help="Poincare ratio ensemble on rough-coefficient solutions")
    _common(p)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="ellipticity bound (default: spec)")
    p.add_argument("--p", type=float, default=1.0, help="L^p exponent")
    p.add_argument("--preset", choices=["random", "checkerboard", "identity"], default="random")
    p.add_argument("--config", default=None, help="grid config JSON (half_widths, cells, t_span, ...)")
    p.add_argument("--cells", default=None, help="cells per layer, comma separated")
    p.add_argument("--radius", type=float, default=None, help="fixed ambient radius R")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--time-cells", type=int, default=50)

    # -------------------------
    # solve
    # -------------------------
    p = sub.add_parser("solve", help="finite-difference solve of a Gaussian bump")
    _common(p)
    p.add_argument("--cells", default="32,64", help="cells per layer, comma separated")
    p.add_argument("--half-widths", default="5,10", help="box half-width per layer, comma separated")
    p.add_argument("--t-span", default="0,1", help="start,end")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--preset", choices=["random", "checkerboard", "identity"], default="identity")
    p.add_argument("--velocity-boundary", choices=["periodic", "dirichlet-zero", "dirichlet-frozen-inflow"],
                   default="dirichlet-zero")
    p.add_argument("--position-boundary", choices=["periodic", "dirichlet-zero", "dirichlet-frozen-inflow"],
                   default="periodic")

    # -------------------------
    # simulate
    # -------------------------
    p = sub.add_parser("simulate", help="Monte Carlo paths of the Kolmogorov process")
    _common(p)
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=None, help="step (default: horizon for the exact scheme)")
    p.add_argument("--scheme", choices=["exact", "euler-maruyama"], default="exact")
    p.add_argument("--diffusivity", type=float, default=0.5)
    return parser


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code (0, 1, 2 or 3)."""
    try:
        args = _parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 on --help / --version
        return int(exc.code or 0)

    out_dir = Path(args.out) if args.out else Path(DEFAULT_OUTPUT_DIR) / args.command
    manifest = RunManifest(
        tool=TOOL_NAME,
        version=TOOL_VERSION,
        command=args.command,
        arguments={k: v for k, v in vars(args).items() if k != "command"},
        seed=args.seed,
    )
    try:
        with get_run_context(out_dir, manifest) as outputs:
            HANDLERS[args.command](args, outputs)
    except (KineticError, ValidationError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return exit_code_for(exc)
    except Exception:
        logger.exception("%s failed unexpectedly", args.command)
        return 1
    logger.info("%s finished | outputs in %s", args.command, out_dir)
    return 0
