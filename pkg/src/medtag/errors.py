"""Exception hierarchy shared across the toolkit."""


class MedtagError(Exception):
    """Base class for every error raised by this package."""


class DataValidationError(MedtagError):
    """Input data violates a documented file format or invariant."""


class ConfigError(MedtagError):
    """A configuration value or combination of values is unusable."""
