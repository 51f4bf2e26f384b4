"""
Structural description of a Kolmogorov-type system and the points and
cylinders living on its group.

Coordinates are held internally in stacked order (x^(0), ..., x^(kappa))
with time kept separately; display order (x^(kappa), ..., x^(0), t) is only
used at I/O boundaries.
"""

from __future__ import annotations

import logging
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import Field, computed_field, field_validator, model_validator

from data_models.base import FrozenModel, flatten_nested
from data_utils.settings import get_settings
from kinetic_tools.errors import InvalidSpecError

logger = logging.getLogger(__name__)


class SystemSpec(FrozenModel):
    """
    kappa layers below the velocity layer, scaling exponent beta and the
    coupling blocks B_i (d_i x d_{i-1}, row-major flat).
    """

    kappa: int
    beta: float
    dims: Tuple[int, ...]
    blocks: Tuple[Tuple[float, ...], ...]
    lambda_: float = Field(default=1.0, alias="lambda")

    # =====================================================
    # VALIDATORS
    # =====================================================
    @field_validator("blocks", mode="before")
    @classmethod
    def _flatten_blocks(cls, value):
        if isinstance(value, (list, tuple)):
            return tuple(flatten_nested(block) for block in value)
        return value

    @model_validator(mode="after")
    def _check_structure(self) -> "SystemSpec":
        if self.kappa < 1:
            raise InvalidSpecError(f"kappa must be >= 1, got {self.kappa}")
        if not 0.0 < self.beta <= 1.0:
            raise InvalidSpecError(f"beta must lie in (0, 1], got {self.beta}")
        if len(self.dims) != self.kappa + 1:
            raise InvalidSpecError(
                f"expected {self.kappa + 1} layer dimensions, got {len(self.dims)}"
            )
        if any(d < 1 for d in self.dims):
            raise InvalidSpecError("layer dimensions must be >= 1")
        if any(self.dims[i] > self.dims[i - 1] for i in range(1, len(self.dims))):
            raise InvalidSpecError(f"dims must be non-increasing, got {self.dims}")
        if self.lambda_ < 1.0:
            raise InvalidSpecError(f"lambda must be >= 1, got {self.lambda_}")
        if len(self.blocks) != self.kappa:
            raise InvalidSpecError(f"expected {self.kappa} blocks, got {len(self.blocks)}")

        tol = get_settings().RANK_TOLERANCE
        for i in range(1, self.kappa + 1):
            rows, cols = self.dims[i], self.dims[i - 1]
            flat = self.blocks[i - 1]
            if len(flat) != rows * cols:
                raise InvalidSpecError(
                    f"block B_{i} must have {rows}x{cols} entries, got {len(flat)}"
                )
            mat = np.asarray(flat, dtype=float).reshape(rows, cols)
            if not np.all(np.isfinite(mat)):
                raise InvalidSpecError(f"block B_{i} has non-finite entries")
            sigma = np.linalg.svd(mat, compute_uv=False)
            if sigma[0] == 0.0 or sigma[-1] <= tol * sigma[0]:
                raise InvalidSpecError(f"block B_{i} is not of full row rank")
            # stacked B has the blocks on disjoint row/column sets
            if sigma[0] > self.lambda_ * (1.0 + 1e-12):
                raise InvalidSpecError(
                    f"||B_{i}|| = {sigma[0]:.6g} exceeds lambda = {self.lambda_}"
                )
        return self

    # =====================================================
    # DERIVED STRUCTURE
    # =====================================================
    @property
    def N(self) -> int:
        return int(sum(self.dims))

    @property
    def d0(self) -> int:
        return int(self.dims[0])

    @property
    def offsets(self) -> Tuple[int, ...]:
        out, acc = [], 0
        for d in self.dims:
            out.append(acc)
            acc += d
        return tuple(out)

    def layer_slice(self, i: int) -> slice:
        start = self.offsets[i]
        return slice(start, start + self.dims[i])

    def block(self, i: int) -> np.ndarray:
        """B_i as a (d_i, d_{i-1}) array, 1 <= i <= kappa."""
        if not 1 <= i <= self.kappa:
            raise IndexError(f"block index {i} out of range 1..{self.kappa}")
        return np.asarray(self.blocks[i - 1], dtype=float).reshape(
            self.dims[i], self.dims[i - 1]
        )

    def layer_exponents(self) -> np.ndarray:
        """Per-coordinate dilation exponent 1 + 2 i beta in stacked order."""
        return np.concatenate(
            [np.full(d, 1.0 + 2.0 * i * self.beta) for i, d in enumerate(self.dims)]
        )

    @property
    def homogeneous_dimension(self) -> float:
        return float(
            sum(d * (1.0 + 2.0 * i * self.beta) for i, d in enumerate(self.dims))
            + 2.0 * self.beta
        )

    def is_identity_chain(self) -> bool:
        """True when every d_i equals d_0 and every B_i is the identity."""
        if any(d != self.d0 for d in self.dims):
            return False
        eye = np.eye(self.d0)
        return all(np.array_equal(self.block(i), eye) for i in range(1, self.kappa + 1))

    # =====================================================
    # FACTORIES
    # =====================================================
    @classmethod
    def kolmogorov(cls, kappa: int = 1, d: int = 1, beta: float = 1.0, lambda_: float = 1.0) -> "SystemSpec":
        """Chain with identity couplings, the classical Kolmogorov operator for kappa=1."""
        eye = tuple(float(v) for v in np.eye(d).ravel())
        return cls(
            kappa=kappa,
            beta=beta,
            dims=tuple([d] * (kappa + 1)),
            blocks=tuple([eye] * kappa),
            lambda_=lambda_,
        )

    def to_document(self) -> dict:
        return {
            "kappa": self.kappa,
            "beta": self.beta,
            "dims": list(self.dims),
            "blocks": [list(b) for b in self.blocks],
            "lambda": self.lambda_,
        }


class KineticPoint(FrozenModel):
    """A point (x, t) of R^N x R; ``x`` in stacked order."""

    x: Tuple[float, ...]
    t: float

    @field_validator("x", mode="before")
    @classmethod
    def _coerce_x(cls, value):
        if isinstance(value, np.ndarray):
            return tuple(float(v) for v in value.ravel())
        return value

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    def layer(self, spec: SystemSpec, i: int) -> np.ndarray:
        return self.vector[spec.layer_slice(i)]

    def with_time(self, t: float) -> "KineticPoint":
        return KineticPoint(x=self.x, t=t)

    @classmethod
    def from_array(cls, x: np.ndarray, t: float) -> "KineticPoint":
        return cls(x=tuple(float(v) for v in np.ravel(x)), t=float(t))

    @classmethod
    def origin(cls, spec: SystemSpec) -> "KineticPoint":
        return cls(x=tuple([0.0] * spec.N), t=0.0)

    @classmethod
    def from_display(cls, spec: SystemSpec, coords: List[float]) -> "KineticPoint":
        """Parse (x^(kappa), ..., x^(0), t) into stacked storage."""
        coords = [float(c) for c in coords]
        if len(coords) != spec.N + 1:
            raise InvalidSpecError(
                f"expected {spec.N + 1} display coordinates, got {len(coords)}"
            )
        layers, pos = {}, 0
        for i in range(spec.kappa, -1, -1):
            layers[i] = coords[pos:pos + spec.dims[i]]
            pos += spec.dims[i]
        stacked = [v for i in range(spec.kappa + 1) for v in layers[i]]
        return cls(x=tuple(stacked), t=coords[-1])

    def display(self, spec: SystemSpec) -> List[float]:
        x = self.vector
        out: List[float] = []
        for i in range(spec.kappa, -1, -1):
            out.extend(float(v) for v in x[spec.layer_slice(i)])
        out.append(float(self.t))
        return out


CylinderKind = Literal["unit-template", "dilated", "translated"]


class Cylinder(FrozenModel):
    """
    center o (delta_radius (template)), template = unit balls per layer times
    the time interval (t_lo, t_hi].

    ``kind`` is derived: the bare template at the origin, a dilation of it
    about the origin, or a translated copy. ``label`` is a free display name.
    """

    center: KineticPoint
    radius: float
    time_interval: Tuple[float, float] = (-1.0, 0.0)
    label: Optional[str] = None

    @computed_field
    @property
    def kind(self) -> CylinderKind:
        if any(self.center.x) or self.center.t != 0.0:
            return "translated"
        return "unit-template" if self.radius == 1.0 else "dilated"

    @model_validator(mode="after")
    def _check(self) -> "Cylinder":
        if not self.radius > 0:
            raise InvalidSpecError(f"cylinder radius must be positive, got {self.radius}")
        lo, hi = self.time_interval
        if not lo < hi:
            raise InvalidSpecError(f"empty cylinder time interval ({lo}, {hi}]")
        return self


class LayoutConfig(FrozenModel):
    """
    Three-cylinder layout: Q+ = Q_1, Q0 and Q- unit cylinders whose time
    windows end at ``zero_top`` and ``minus_top``.

    Consecutive windows are separated by a gap of at least DELTA_MIN, so
    every pair joined by a trajectory has |delta| above the floor.
    """

    zero_top: float = -2.0
    minus_top: float = -4.0
    window: float = 1.0

    @property
    def gaps(self) -> Tuple[float, float]:
        """(Q+ to Q0, Q0 to Q-) distances between the time windows."""
        return -self.window - self.zero_top, self.zero_top - self.window - self.minus_top

    @model_validator(mode="after")
    def _check(self) -> "LayoutConfig":
        if self.window <= 0:
            raise InvalidSpecError("layout window must be positive")
        floor = get_settings().DELTA_MIN
        for gap, names in zip(self.gaps, (("Q0", "Q+"), ("Q-", "Q0"))):
            if not gap > 0:
                raise InvalidSpecError(f"{names[0]} must end strictly before {names[1]} starts")
            if gap < floor:
                raise InvalidSpecError(
                    f"gap {gap:.6g} between {names[0]} and {names[1]} is below the time floor {floor}"
                )
        return self
