"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the documented domain of an operation."""


class DegenerateDistributionError(ValueError):
    """A predicted distribution carries no usable probability mass."""


class IncompatibleEncodingError(ValueError):
    """A label encoding violates a precondition of the selected loss."""


class ConfigurationError(ValueError):
    """An experiment or CLI configuration is invalid or inconsistent."""
