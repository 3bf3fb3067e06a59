"""Exception hierarchy shared across the package.

Plain ``ValueError`` is used for simple argument violations (bad ranges,
mismatched counts). The classes below mark failure modes callers are
expected to branch on: the CLI maps any ``YieldFillError`` to exit code 1.
"""

__all__ = [
    "YieldFillError",
    "DataError",
    "ParseError",
    "GeometryError",
    "NumericError",
    "ShapeError",
    "StateError",
    "ConfigError",
    "DivergenceError",
]


class YieldFillError(Exception):
    """Base class for all package-specific errors."""


class DataError(YieldFillError):
    """Input data is structurally valid but violates a domain requirement."""


class ParseError(DataError):
    """A file could not be parsed; the message carries the row/column locus."""


class GeometryError(YieldFillError):
    """Anchor points are too few or degenerate (collinear) for a surface fit."""


class NumericError(YieldFillError):
    """A linear solve failed or produced an unusable result."""


class ShapeError(YieldFillError):
    """Array shapes are incompatible with the requested operation."""


class StateError(YieldFillError):
    """An operation was called before its prerequisite state existed."""


class ConfigError(YieldFillError):
    """A configuration object violates its invariants."""


class DivergenceError(YieldFillError):
    """Training produced a non-finite or exploding loss.

    Carries the last finite parameter vector so callers can checkpoint it.
    """

    def __init__(self, message, last_good_params=None, epoch=None):
        super().__init__(message)
        self.last_good_params = last_good_params
        self.epoch = epoch
