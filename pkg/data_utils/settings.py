from functools import lru_cache
from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class KineticSettings(BaseSettings):
    """
    Numerical tolerances and run knobs for the kinetic toolkit.

    Every operation takes an optional ``settings`` argument and falls back
    to ``get_settings()``, so tests can pass a tweaked copy instead of
    patching the environment.
    """

    # Pydantic automatically handles the priority:
    # 1. OS Environment Variables (KINETIC_ prefix)
    # 2. .env file values
    # 3. Default values
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="KINETIC_",
        case_sensitive=True,
        extra="ignore",
    )

    # -------------------------
    # Linear algebra
    # -------------------------
    RANK_TOLERANCE: float = Field(default=1e-10, gt=0)
    PINV_TOLERANCE: float = Field(default=1e-12, gt=0)
    DET_RELATIVE_TOLERANCE: float = Field(default=1e-9, gt=0)
    DET_FAILURE_TOLERANCE: float = Field(default=1e-6, gt=0)
    SOLUTION_METHOD: Literal["factored", "min-norm"] = Field(default="factored")

    # -------------------------
    # Control basis
    # -------------------------
    ALPHA_SPREAD: float = Field(default=0.1, gt=0)
    ALPHA_MIN_GAP: float = Field(default=1e-9, gt=0)
    LOG_SPACE_KAPPA: int = Field(default=8, ge=1)

    # -------------------------
    # Trajectories
    # -------------------------
    DELTA_MIN: float = Field(default=1.0, gt=0)
    PSI_S0: float = Field(default=0.5, gt=0, le=1)
    PSI_CONDITION_LIMIT: float = Field(default=1e8, gt=1)
    ENDPOINT_TOLERANCE: float = Field(default=1e-9, gt=0)
    SLOPE_WINDOW_LO: float = Field(default=1e-6, gt=0)
    SLOPE_WINDOW_HI: float = Field(default=1e-3, gt=0)
    SLOPE_NODES: int = Field(default=20, ge=3)
    QUADRATURE_NODES: int = Field(default=32, ge=2)
    QUADRATURE_SPLIT: float = Field(default=0.5, gt=0, lt=1)

    # -------------------------
    # Solvers and verifier
    # -------------------------
    CFL_LIMIT: float = Field(default=1.0, gt=0)
    RHS_FLOOR: float = Field(default=1e-14, gt=0)
    RATIO_CEILING: float = Field(default=1e6, gt=0)
    AMBIENT_RADIUS_CAP: float = Field(default=4.0, ge=1)
    ENSEMBLE_WORKERS: int = Field(default=4, ge=1)
    SDE_CHUNK_SIZE: int = Field(default=250_000, ge=1)

    # Optional fixed ambient radius; None means estimate it from trajectories
    AMBIENT_RADIUS: Optional[float] = Field(default=None)

    def slope_window(self) -> tuple:
        if not 0 < self.SLOPE_WINDOW_LO < self.SLOPE_WINDOW_HI <= 1:
            raise ValueError("slope window must satisfy 0 < lo < hi <= 1")
        return self.SLOPE_WINDOW_LO, self.SLOPE_WINDOW_HI


@lru_cache(maxsize=1)
def get_settings() -> KineticSettings:
    """Process-wide settings instance, read once from env / .env."""
    return KineticSettings()


def resolve_settings(settings: Optional[KineticSettings]) -> KineticSettings:
    return settings if settings is not None else get_settings()
