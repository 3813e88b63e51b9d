"""Exception types shared across the package.

Everything raised deliberately by this package derives from QdmdError so
callers can catch one base class at CLI boundaries and map it to an exit
code without fishing for numpy internals.
"""

from __future__ import annotations


class QdmdError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(QdmdError):
    """A configuration value is malformed or out of its documented domain."""


class ShapeError(QdmdError):
    """An array argument has the wrong shape or inconsistent dimensions."""


class InsufficientDataError(QdmdError):
    """Not enough snapshots/samples to perform the requested operation."""


class RankError(QdmdError):
    """A requested truncation rank exceeds the available spectrum."""


class DivergenceError(QdmdError):
    """Numerical integration produced a non-finite state.

    Attributes
    ----------
    time : float
        Simulation time at which the first non-finite value appeared.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class FileFormatError(QdmdError):
    """A matrix or report file violates its documented format.

    ``row``/``col`` locate the offending entry when that is meaningful,
    otherwise they are None.
    """

    def __init__(self, message: str, path: str = "", row: int | None = None,
                 col: int | None = None):
        super().__init__(message)
        self.path = path
        self.row = row
        self.col = col


class IllConditionedWarning(UserWarning):
    """Eigenvector basis of a reduced operator is close to defective."""
