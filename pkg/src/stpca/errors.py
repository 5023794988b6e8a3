"""Exception types shared across the package.

Everything user-facing derives from StpcaError so the CLI can map any
library failure to a single nonzero exit code while keeping the usual
ValueError/RuntimeError semantics for library callers.
"""


class StpcaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDataError(StpcaError, ValueError):
    """Numeric input is unusable: non-finite entries, too few samples, empty data."""


class ShapeError(StpcaError, ValueError):
    """Array dimensions do not match what the operation requires."""


class ParameterError(StpcaError, ValueError):
    """A parameter value is outside its allowed range."""


class ConvergenceError(StpcaError, RuntimeError):
    """Iterative eigensolver failed to reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DataFormatError(StpcaError, ValueError):
    """A file could not be parsed; the message carries the location."""
