"""Exception types shared across the package."""


class FfadError(Exception):
    """Base class for all package errors."""


class EmptyDirectoryError(FfadError):
    pass


class DecodeError(FfadError):
    pass


class ShapeMismatchError(FfadError):
    pass


class TooShortError(FfadError):
    pass


class TooSmallError(FfadError):
    pass


class ParseError(FfadError):
    pass


class ConfigError(FfadError):
    pass


class ShapeError(FfadError):
    pass


class NegativeWeightError(FfadError):
    pass


class NonFiniteLossError(FfadError):
    pass


class EmptyDatasetError(FfadError):
    pass


class EmptySeriesError(FfadError):
    pass


class NonFiniteError(FfadError):
    pass


class SingleClassError(FfadError):
    pass


class LengthMismatchError(FfadError):
    pass


class WeightsNotFoundError(FfadError):
    pass


class CheckpointError(FfadError):
    pass
