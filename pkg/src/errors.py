class EccpowError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(EccpowError, ValueError):
    """Invalid parameters handed to a library operation."""


class DimensionError(ParameterError):
    """A vector length does not match the matrix it is used with."""


class DomainError(ParameterError):
    """A value lies outside the domain where a statistic is defined."""


class DegenerateRangeError(ParameterError):
    """All sample values are equal, so no bin range can be formed."""


class ConfigError(EccpowError):
    """A configuration file is missing, unreadable or invalid."""

    def __init__(self, message: str, key_path: str = ""):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class UsageError(EccpowError):
    """The command line was used incorrectly."""
