"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 2); numerical
and consistency failures derive from :class:`NumericalError` (exit code 3).
"""

from __future__ import annotations


class SelinfError(Exception):
    """Base class for all package errors."""


class InputError(SelinfError, ValueError):
    """Malformed data, arguments or files."""


class NumericalError(SelinfError, ArithmeticError):
    """A computation could not be carried out reliably."""


class RankDeficiencyError(InputError):
    """A design submatrix does not have full column rank."""

    def __init__(self, message: str, columns: tuple = ()):
        super().__init__(message)
        self.columns = tuple(columns)


class SaturatedModelError(InputError):
    """The model leaves no residual degrees of freedom."""


class DegenerateDirectionError(NumericalError):
    """The test direction carries no signal (e.g. v'y == 0)."""


class InconsistentEventError(NumericalError):
    """The observed data do not satisfy a recorded selection event."""


class PrecisionError(NumericalError):
    """Probability mass underflowed even in log space."""


class BracketError(NumericalError):
    """A root could not be bracketed within the expansion limit."""
