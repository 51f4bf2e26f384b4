from __future__ import annotations

from typing import Tuple

from pydantic import model_validator

from data_models.base import FrozenModel
from data_utils.settings import get_settings
from kinetic_tools.errors import DegenerateBasisError, InvalidParametersError


class ControlBasis(FrozenModel):
    """
    Exponents alpha_0..alpha_kappa of the control profiles s^alpha_i.

    Distinct exponents in (-1, 0) keep every profile integrable on (0, 1]
    and the Wronskian invertible.
    """

    alphas: Tuple[float, ...]
    kappa: int
    beta: float = 1.0
    epsilon: float = 0.0

    @model_validator(mode="after")
    def _check(self) -> "ControlBasis":
        if len(self.alphas) != self.kappa + 1:
            raise InvalidParametersError(
                f"need kappa + 1 = {self.kappa + 1} exponents, got {len(self.alphas)}"
            )
        for a in self.alphas:
            if not -1.0 < a < 0.0:
                raise InvalidParametersError(f"exponent {a} outside (-1, 0)")
        if self.epsilon < 0:
            raise InvalidParametersError("epsilon must be non-negative")
        gap = get_settings().ALPHA_MIN_GAP
        ordered = sorted(self.alphas)
        for lo, hi in zip(ordered, ordered[1:]):
            if hi - lo <= gap:
                raise DegenerateBasisError(
                    f"exponents {lo} and {hi} coincide (gap <= {gap:g})"
                )
        return self

    @property
    def size(self) -> int:
        return self.kappa + 1
