"""Numeric bundles produced by the Wronskian engine and trajectory builder."""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from data_models.control_basis import ControlBasis
from data_models.kinetic_system import KineticPoint, SystemSpec


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + offset, acting on stacked spatial coordinates."""

    matrix: np.ndarray
    offset: np.ndarray
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.matrix @ x + self.offset
        return x @ self.matrix.T + self.offset

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))


@dataclass(frozen=True)
class TrajectoryBundle:
    """
    Solved control problem joining ``endpoint`` (s=0) to ``target`` (s=1).

    ``control`` holds the stacked coefficient vector M in R^{(kappa+1) d0},
    ``defect`` the boundary defect Y = x_0 - T(1) x_endpoint;
    ``wronskian`` is the WronskianBundle the solve used.
    """

    spec: SystemSpec
    basis: ControlBasis
    endpoint: KineticPoint
    target: KineticPoint
    delta: float
    control: np.ndarray
    defect: np.ndarray
    wronskian: Any
    residual: float = 0.0

    def control_blocks(self) -> np.ndarray:
        """M reshaped to (kappa + 1, d0): row i multiplies s^alpha_i."""
        return self.control.reshape(self.basis.size, self.spec.d0)

    @property
    def is_trivial(self) -> bool:
        return not np.any(self.control)


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit of log|grad Phi^{-1}| against log s."""

    slope: Optional[float]
    intercept: Optional[float]
    predicted_slope: float
    window: Tuple[float, float]
    n_nodes: int
    excluded: bool = False
    reason: str = ""


@dataclass(frozen=True)
class RadiusEstimate:
    """Empirical bounding radius of sampled trajectories."""

    radius: float
    attained_by: str
    per_layer: Dict[str, float]
    n_samples: int
    seed: int
