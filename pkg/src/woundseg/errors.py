"""Exception types used to map failures onto CLI exit codes."""


class WoundsegError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(WoundsegError):
    """Bad configuration or usage (CLI exit code 1)."""


class DataError(WoundsegError):
    """Unreadable, inconsistent or missing input data (CLI exit code 2)."""


class PredictionError(WoundsegError):
    """A predictor failed for one image; inference runs continue past these."""
