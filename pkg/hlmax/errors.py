"""
Error Types
Exception hierarchy shared by the numerical pipeline and the CLI
"""
from typing import Optional


class HlmaxError(Exception):
    """Base class for every error raised by hlmax"""


class UsageError(HlmaxError, ValueError):
    """An operation was called with arguments it does not accept (wrong space kind, variant mismatch)"""


class DomainError(HlmaxError, ValueError):
    """A numeric argument lies outside the mathematical domain (r <= 0, b <= 0, p < 1)"""


class ParseError(HlmaxError, ValueError):
    """A descriptor string could not be parsed"""

    def __init__(self, message: str, token: Optional[str] = None):
        self.token = token
        if token is not None:
            message = f"{message} (bad token: {token!r})"
        super().__init__(message)


class ConfigurationError(HlmaxError, ValueError):
    """Invalid numerical or runtime configuration"""


class ValidationError(HlmaxError, ValueError):
    """Input data failed validation (weight tables, mass checks)"""


class UnsupportedInputError(HlmaxError, ValueError):
    """The operator cannot certify a result for this input"""


class NumericError(HlmaxError, ArithmeticError):
    """A computation produced a non-finite value"""
