"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file does not follow the expected binary or JSON layout."""


class NumericError(ArithmeticError):
    """Training or estimation produced a non-finite value."""


class DegenerateCorrelationWarning(RuntimeWarning):
    """A correlation used for a phase estimate had zero magnitude."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
