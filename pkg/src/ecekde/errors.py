"""Exception types raised by ecekde.

Every error derives from :class:`CalibrationError`, which is itself a
``ValueError`` so callers that only care about bad input can catch that.
"""


class CalibrationError(ValueError):
    """Base class for all ecekde errors."""


class EmptyInput(CalibrationError):
    pass


class NegativeCoordinate(CalibrationError):
    pass


class SumOutOfTolerance(CalibrationError):
    pass


class NonPositiveTemperature(CalibrationError):
    pass


class InvalidDimension(CalibrationError):
    pass


class IndexOutOfRange(CalibrationError):
    pass


class DimensionMismatch(CalibrationError):
    pass


class BoundaryInput(CalibrationError):
    pass


class TooFewPoints(CalibrationError):
    pass


class InvalidConfig(CalibrationError):
    pass


class NotBinary(CalibrationError):
    pass


class UnsupportedNorm(CalibrationError):
    pass


class LengthMismatch(CalibrationError):
    pass


class DegenerateDenominator(CalibrationError):
    pass


class InsufficientGrid(CalibrationError):
    pass


class NonPositiveError(CalibrationError):
    pass


class TooFewRows(CalibrationError):
    pass


class InvalidLevel(CalibrationError):
    pass
