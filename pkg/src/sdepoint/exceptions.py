"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its tolerance."""


class ConfigError(ValueError):
    """A problem or run configuration is malformed."""
