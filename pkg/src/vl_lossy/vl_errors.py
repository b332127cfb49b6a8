"""
Error Types
===========
Exception hierarchy shared by every vl_lossy module.

All errors derive from LossyCodingError, itself a ValueError, so callers that
only care about "bad input" can catch ValueError.
"""

from typing import Optional


class LossyCodingError(ValueError):
    """Root of all vl_lossy errors."""


class InvalidParameterError(LossyCodingError):
    """A scalar parameter (alpha, t, epsilon, D, index) is out of range."""


class InvalidDistributionError(LossyCodingError):
    """A FinitePmf, Weights or DistortionSpec violates its invariants."""


class InvalidComparisonError(LossyCodingError):
    """Two weight vectors cannot be compared under majorization."""


class UnknownSymbolError(LossyCodingError):
    """A symbol is not part of the declared alphabet."""


class InfeasibleError(LossyCodingError):
    """No code meets the excess distortion constraint: the uncovered mass exceeds epsilon."""

    def __init__(self, message: str, violating_mass: float):
        super().__init__(message)
        self.violating_mass = violating_mass


class DomainError(LossyCodingError):
    """A distortion level lies outside the region where a quantity is defined."""


class ConvergenceError(LossyCodingError):
    """An iterative solver stopped at its iteration cap without converging."""

    def __init__(self, message: str, iterations: int, last_change: float):
        super().__init__(message)
        self.iterations = iterations
        self.last_change = last_change


class InstanceTooLargeError(LossyCodingError):
    """An exhaustive computation exceeds its configured budget."""

    def __init__(self, message: str, size: int, budget: int):
        super().__init__(message)
        self.size = size
        self.budget = budget


class PreconditionError(LossyCodingError):
    """A verification routine received an object that violates its preconditions."""


class ConfigError(LossyCodingError):
    """A configuration file or flag is malformed."""

    def __init__(self, message: str, location: Optional[str] = None):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
