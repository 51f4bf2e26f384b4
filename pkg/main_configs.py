import logging
import os
from typing import Optional

from dotenv import load_dotenv

# ============================================================
# Environment bootstrap
# ============================================================
# Load variables from .env early.
# override=True allows local runs to intentionally shadow system envs.
load_dotenv(override=True)


# ============================================================
# Logging Configuration
# ============================================================
# LOG_LEVEL is expected to be something like: DEBUG, INFO, WARNING, ERROR
# Default to INFO if missing or invalid.
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.INFO),
    format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
)

logger = logging.getLogger(__name__)


# ============================================================
# Tool Metadata
# ============================================================
# Written into every run manifest so artefacts can be traced to a build.
TOOL_NAME: str = os.getenv("KINETIC_TOOL_NAME", "kinetic-poincare")
TOOL_VERSION: str = os.getenv("KINETIC_TOOL_VERSION", "1.0.0")
TOOL_DESCRIPTION: str = (
    "Trajectories, Wronskian solves and Poincare checks "
    "for Kolmogorov-type kinetic equations"
)


# ============================================================
# Run Defaults
# ============================================================
# Seed parsing should be strict: invalid values must fail fast
try:
    DEFAULT_SEED: int = int(os.getenv("KINETIC_DEFAULT_SEED", "20240601"))
except ValueError:
    raise RuntimeError("KINETIC_DEFAULT_SEED must be a valid integer")

if DEFAULT_SEED < 0:
    raise RuntimeError("KINETIC_DEFAULT_SEED must be non-negative")

# Where CLI artefacts go when --out is omitted
DEFAULT_OUTPUT_DIR: str = os.getenv("KINETIC_OUTPUT_DIR", "./runs")

# Optional default SystemSpec document for commands run without --spec
DEFAULT_SPEC_PATH: Optional[str] = os.getenv("KINETIC_SPEC_PATH")
