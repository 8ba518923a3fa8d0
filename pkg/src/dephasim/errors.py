"""Exception types shared across the package."""


class DephasimError(Exception):
    """Base class for all package errors."""


class SpecificationError(DephasimError):
    """Invalid model parameters, dimensions, or preconditions."""


class ConfigError(SpecificationError):
    """Invalid scenario configuration; message names the offending field."""


class IntegrationFailureError(DephasimError):
    """Numerical integration broke an invariant or underflowed its step size.

    Carries the evolution time at which the failure was detected.
    """

    def __init__(self, message: str, time: float | None = None):
        if time is not None:
            message = f"{message} (at t={time:.6g})"
        super().__init__(message)
        self.time = time


class FitDomainError(DephasimError):
    """Fit window contains too few points or nonpositive values."""


class DataQualityError(DephasimError):
    """Input data violates a sanity bound (e.g. populations not summing to 1)."""
