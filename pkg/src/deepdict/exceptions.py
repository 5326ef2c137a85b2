"""Exception types raised across the package."""


class DDLError(Exception):
    """Base class for all errors raised by deepdict."""


class ShapeError(DDLError, ValueError):
    """Matrix dimensions are incompatible or out of range."""


class NumericError(DDLError, ArithmeticError):
    """A matrix contains NaN/Inf or a computation produced non-finite values."""


class DataError(DDLError, ValueError):
    """A data or model file could not be parsed."""
