"""Exception types shared across the package."""


class LidarLocError(Exception):
    """Base class for data-level failures (CLI exit code 2)."""


class NumericalError(Exception):
    """Base class for numerical failures (CLI exit code 3)."""


class DensityTooLow(LidarLocError):
    pass


class ParseError(LidarLocError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingIntensity(LidarLocError):
    pass


class DimensionMismatch(LidarLocError):
    pass


class ImageTooSmall(LidarLocError):
    pass


class EmptyOverlap(LidarLocError):
    pass


class TooFewFrames(LidarLocError):
    pass


class ShapeMismatch(NumericalError):
    pass


class BatchTooSmall(NumericalError):
    pass


class NonFinite(NumericalError):
    pass
