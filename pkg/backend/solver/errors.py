"""Exceptions raised by the numerical core and the experiment layer.

The agents layer catches these and turns them into failure reports and exit
statuses; the kernels themselves never swallow them.
"""
from typing import Any, Optional


class SolverError(Exception):
    """Base class for every error raised by the solver packages."""


class ContractViolation(SolverError):
    """An operation was called outside its precondition (wrong representation, wrong model mode, ...)."""


class MeanCompatibilityError(SolverError):
    """Biot-Savart inversion was given a vorticity with nonzero mean."""


class PartitionError(SolverError):
    """The grid cannot host a usable dyadic partition."""


class ResolutionError(SolverError):
    """Initial-data parameters are not resolved by the grid."""


class FitError(SolverError):
    """A decay-exponent fit cannot be performed on the selected records."""


class SchemaError(SolverError):
    """A CSV time series or a snapshot file does not match the expected layout."""


class BlowUpError(SolverError):
    """Time stepping produced NaN/Inf or crossed the norm ceiling.

    ``last_state`` is the last state whose fields were all finite and ``t`` the
    time at which the failure was detected.
    """

    def __init__(self, message: str, last_state: Any, t: float):
        super().__init__(message)
        self.last_state = last_state
        self.t = t


class ConfigError(SolverError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message: str, key: Optional[str] = None, suggestion: Optional[str] = None):
        if suggestion:
            message = f"{message} (did you mean '{suggestion}'?)"
        super().__init__(message)
        self.key = key
        self.suggestion = suggestion
