"""Exception types shared across the package."""


class QfaError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(QfaError, ValueError):
    """Invalid arguments, domains, sizes, or malformed inputs."""


class SolverError(QfaError, RuntimeError):
    """Optimization failed to converge.

    Carries the last iterate and duality gap when available so callers can
    inspect how close the solve got.
    """

    def __init__(self, message, *, last_iterate=None, gap=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.gap = gap


class NumericError(QfaError, RuntimeError):
    """Numerical failure: singular matrices, non-finite values, etc."""
