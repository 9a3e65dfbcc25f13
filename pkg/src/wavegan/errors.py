"""Shared exception types."""


class ShapeError(ValueError):
    """Tensor shape violates an operation's contract."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration value."""


class EpisodeError(ValueError):
    """Malformed episode (wrong K, mixed labels, ...)."""


class ContractError(ValueError):
    """A runtime contract between modules was violated."""
