"""Exception types shared across the package."""


class SonarPropError(Exception):
    """Base class for errors raised by this package."""


class DataError(SonarPropError):
    """A file, dataset, or checkpoint is missing, malformed, or inconsistent."""


class CheckpointError(DataError):
    """A checkpoint file failed validation (magic, version, shape, truncation)."""


class NumericError(SonarPropError):
    """A numeric computation produced non-finite values and cannot continue."""
