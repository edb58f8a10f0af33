"""Exception types shared across the package."""


class CondRegError(Exception):
    """Base class for all condreg errors."""


class GridMismatchError(CondRegError, ValueError):
    """Inputs live on incompatible grids, or a grid is too small for the op."""


class RangeError(CondRegError, ValueError):
    """A scalar argument (typically lambda) is outside its legal range."""


class ConfigError(CondRegError, ValueError):
    """Invalid configuration value or combination."""


class DataError(CondRegError, ValueError):
    """Malformed, truncated, or inconsistent stored data."""


class TrainingDiverged(CondRegError, RuntimeError):
    """Raised when a training step produces a non-finite loss."""
