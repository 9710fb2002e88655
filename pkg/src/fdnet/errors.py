"""Exception types shared across the package."""


class FDNetError(Exception):
    """Base class for all package errors."""


class ConfigError(FDNetError, ValueError):
    """Invalid configuration or arguments."""


class DivergenceError(FDNetError, FloatingPointError):
    """A rollout or loss evaluation produced non-finite values.

    ``step`` is the index of the first non-finite state when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DatasetFormatError(FDNetError):
    """Base class for dataset file problems."""


class ManifestError(DatasetFormatError):
    """The JSON manifest is missing, unparseable or incomplete."""


class ShapeMismatchError(DatasetFormatError):
    """Manifest shape disagrees with the grid, physics or payload size."""


class TruncatedPayloadError(DatasetFormatError):
    """The float64 payload is shorter than the manifest promises."""
