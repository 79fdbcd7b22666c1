"""Exception hierarchy shared by every crossfit module."""

from typing import Any, Optional


class CrossfitError(Exception):
    """Base class for all crossfit errors."""


class DesignError(CrossfitError, ValueError):
    """Raised when input data cannot form a valid crossed design."""


class ConfigError(CrossfitError, ValueError):
    """Raised for unreadable or inconsistent configuration."""


class SingularSystemError(CrossfitError):
    """Raised when a linear system that must be solved is singular."""


class DegenerateFitError(CrossfitError):
    """Raised when a variance or dispersion denominator is not positive."""


class NumericalError(CrossfitError):
    """Raised on non-finite objectives or means pinned at 0 or 1."""


class SeparationError(CrossfitError):
    """Raised when logistic regression coefficients diverge."""


class OracleSizeError(CrossfitError):
    """Raised when a dense reference computation exceeds its size guard."""


class ConvergenceError(CrossfitError):
    """
    Raised when an iteration cap is hit and the caller asked for strictness.

    The last iterate is kept on the exception so callers can still report it.
    """

    def __init__(self, message: str, last_iterate: Optional[Any] = None):
        super().__init__(message)
        self.last_iterate = last_iterate
