"""Exception types shared across the package."""


class PanoSweepError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PanoSweepError):
    """Invalid configuration value or malformed config document."""


class DomainError(PanoSweepError, ValueError):
    """Input outside the mathematical domain of an operation."""


class FormatError(PanoSweepError):
    """Malformed or unsupported file content."""


class NumericalError(PanoSweepError):
    """A computation could not produce a meaningful numerical result."""
