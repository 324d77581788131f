"""Exception types shared across the package."""


class PairclustError(Exception):
    """Base class for all package errors."""


class ShapeError(PairclustError, ValueError):
    """Operands have incompatible or invalid dimensions."""


class SingularMatrixError(PairclustError, ValueError):
    """A matrix required to be positive definite is not.

    ``pivot`` is the zero-based index of the Cholesky pivot that failed.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ConfigError(PairclustError, ValueError):
    """Invalid configuration or arguments."""


class UnsupportedClusterCountError(ConfigError):
    """Built-in feature map only supports a specific number of clusters."""


class StateError(PairclustError, RuntimeError):
    """Mismatched or stale internal state (e.g. tape vs parameters)."""


class DataError(PairclustError, ValueError):
    """Malformed data (labels outside {0,1}, bad annotation file, ...)."""


class ModelError(PairclustError, ValueError):
    """A modelling assumption is violated (e.g. pair probability outside [0,1])."""


class DivergenceError(PairclustError, RuntimeError):
    """Training produced non-finite values. ``step`` names the offending SGD step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DegenerateInputError(PairclustError, ValueError):
    """Input is degenerate for the requested computation (e.g. an all-zero row)."""
