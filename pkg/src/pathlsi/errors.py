"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the closed domain of a model manifold."""


class PreconditionError(ValueError):
    """An operation was called outside its documented precondition."""


class ConfigurationError(ValueError):
    """Inconsistent or incomplete user configuration."""
