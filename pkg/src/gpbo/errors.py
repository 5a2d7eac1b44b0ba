"""Exception hierarchy shared across the package."""


class GPBOError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GPBOError, ValueError):
    """Raised on malformed or non-finite numeric input."""


class InvalidConfigurationError(InvalidInputError):
    """Raised when a configuration does not belong to its space."""


class NumericalFailureError(GPBOError, ArithmeticError):
    """Raised when a factorization fails even at the maximum jitter."""


class ProtocolViolationError(GPBOError, RuntimeError):
    """Raised when the suggest/observe protocol is not respected."""


class NotReadyError(GPBOError, RuntimeError):
    """Raised when an operation needs data that does not exist yet."""


class ParseError(GPBOError, ValueError):
    """Raised when a run file cannot be parsed."""
