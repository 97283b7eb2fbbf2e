class LsNetError(Exception):
    """Base class for all errors raised by the package."""


class DimensionError(LsNetError, ValueError):
    """Array shapes are inconsistent with the requested operation."""


class ParameterError(LsNetError, ValueError):
    """A configuration value is out of its valid range."""


class DataError(LsNetError):
    """A file is malformed, truncated or fails its checksum."""


class NumericError(LsNetError, ArithmeticError):
    """A computation produced non-finite values or failed to converge.

    ``state`` optionally carries whatever partial result was available when
    the failure was detected.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
