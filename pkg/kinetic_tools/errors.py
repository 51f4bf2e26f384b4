"""
Error hierarchy shared by every kinetic module.

Each class carries the process exit code the CLI maps it to. None of them
derive from ValueError so they pass through pydantic validators unwrapped.
"""

from typing import Optional


class KineticError(Exception):
    """Base class. ``exit_code`` 1 means numerical failure."""

    exit_code: int = 1


# -----------------------------------------------------------------
# Input / configuration errors (exit 2)
# -----------------------------------------------------------------
class InvalidSpecError(KineticError):
    exit_code = 2


class InvalidParametersError(KineticError):
    exit_code = 2


class GeometryError(KineticError):
    """A cylinder or grid region is empty or falls outside the domain."""

    exit_code = 2


# -----------------------------------------------------------------
# Numerical failures (exit 1)
# -----------------------------------------------------------------
class DegenerateBasisError(KineticError):
    exit_code = 1


class TimeDegenerateError(KineticError):
    exit_code = 1


class SingularMapError(KineticError):
    exit_code = 1


class SingularEvaluationError(KineticError):
    exit_code = 1


class DivergenceError(KineticError):
    exit_code = 1


class CFLViolationError(KineticError):
    exit_code = 1

    def __init__(self, message: str, suggested_dt: Optional[float] = None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


# -----------------------------------------------------------------
# Unsupported mode (exit 3)
# -----------------------------------------------------------------
class UnsupportedModeError(KineticError):
    exit_code = 3
