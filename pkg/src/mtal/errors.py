"""Exception types raised across the package."""


class ValidationError(ValueError):
    """Input violates an operation's preconditions."""


class UnsupportedConfigurationError(ValidationError):
    """A parameter combination the operation does not implement."""
