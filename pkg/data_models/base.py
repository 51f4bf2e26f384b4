from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict


class FrozenModel(BaseModel):
    """
    Base for value objects passed between modules.

    Immutable, rejects unknown fields, and accepts population by field name
    even when an alias (e.g. ``lambda``) is declared.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)


def flatten_nested(value: Any) -> Any:
    """Accept a nested list matrix and return a flat row-major tuple."""
    if isinstance(value, np.ndarray):
        return tuple(float(v) for v in value.ravel())
    if isinstance(value, (list, tuple)) and value and isinstance(value[0], (list, tuple, np.ndarray)):
        return tuple(float(v) for row in value for v in row)
    return value
