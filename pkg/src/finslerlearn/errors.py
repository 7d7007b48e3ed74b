"""Exception hierarchy shared by all modules."""


class FinslerError(Exception):
    """Base class for errors raised by this package."""


class InvalidDrift(FinslerError, ValueError):
    """The drift vector violates ``||omega|| < 1``."""


class DegeneratePair(FinslerError, ValueError):
    """Two points coincide, so the distance gradient is undefined."""


class DataError(FinslerError, ValueError):
    """Malformed input data (parse failures, shape mismatches, bad labels)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GraphError(FinslerError, ValueError):
    """Graph construction or connectivity problem."""


class ConvergenceError(FinslerError, RuntimeError):
    """An iterative solver failed to reach its target.

    ``best`` carries the best iterate found, so callers can inspect or
    accept it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NumericalError(FinslerError, FloatingPointError):
    """Non-finite values appeared during optimisation."""
