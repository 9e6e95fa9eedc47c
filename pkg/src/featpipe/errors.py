"""Exception hierarchy shared across the pipeline.

The CLI maps these onto its exit-code scheme: ConfigError -> 2,
DataError (and subclasses) and ShapeError -> 3, BundleError and
ModelError -> 4, anything else -> 1.
"""


class FeatpipeError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FeatpipeError):
    """A tensor/vector dimension does not satisfy an operation's contract.

    Carries enough structure that callers can name the offending dimension.
    """

    def __init__(self, message, *, dimension=None, expected=None, found=None):
        detail = message
        if dimension is not None:
            detail += f" (dimension: {dimension}"
            if expected is not None:
                detail += f", expected {expected}"
            if found is not None:
                detail += f", found {found}"
            detail += ")"
        super().__init__(detail)
        self.dimension = dimension
        self.expected = expected
        self.found = found


class ConfigError(FeatpipeError):
    """Invalid run configuration (bad value, missing path, unknown key)."""


class DataError(FeatpipeError):
    """Invalid dataset input (manifest, feature file, labels)."""


class DecodeError(DataError):
    """An image byte stream could not be decoded."""

    def __init__(self, message, *, path=None):
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)
        self.path = path


class BundleError(FeatpipeError):
    """Weight bundle failed to load or validate."""


class ModelError(FeatpipeError):
    """SVM/vocabulary model failed to load, validate, or train."""
