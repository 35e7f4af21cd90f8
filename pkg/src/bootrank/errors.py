"""Exception types raised by :mod:`bootrank`."""


class BootrankError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(BootrankError, ValueError):
    """Malformed numeric input (shape mismatch, non-finite entries, bad option)."""


class InvalidRankError(BootrankError, ValueError):
    """A rank argument outside its admissible range."""


class InvalidStateError(BootrankError, RuntimeError):
    """An operation was called in a state the caller should have excluded."""


class CollinearityError(BootrankError, ValueError):
    """A design block is numerically rank deficient."""


class DegenerateVarianceError(BootrankError, ArithmeticError):
    """A variance matrix is too close to singular to weight a quadratic form."""


class DataError(BootrankError, ValueError):
    """Problems reading or assembling observation data."""


class NumericalWarning(UserWarning):
    """Emitted when a computation falls back to a regularized path."""
