"""Exception types shared across the package."""


class InsoleMotionError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(InsoleMotionError, ValueError):
    """Array shapes or channel counts do not match what an operation needs."""


class DataError(InsoleMotionError, ValueError):
    """Input data is malformed, out of physical bounds, or inconsistent."""


class NumericalError(InsoleMotionError, ArithmeticError):
    """A non-finite value appeared in a computation that requires finite values."""
