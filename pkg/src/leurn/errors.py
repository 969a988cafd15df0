"""Exception types shared across the package."""


class LeurnError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(LeurnError):
    """An array argument has an incompatible shape."""


class ConfigError(LeurnError):
    """A configuration value is invalid."""


class DataError(LeurnError):
    """A dataset, CSV file or preprocessing step is invalid."""


class TrainingDivergedError(LeurnError):
    """Training produced a non-finite loss."""


class BundleError(LeurnError):
    """A saved model bundle is missing, truncated or inconsistent."""
