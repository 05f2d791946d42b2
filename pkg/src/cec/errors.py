"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments that break its preconditions."""


class ConfigError(ValueError):
    """Invalid experiment or component configuration."""


class SnapshotFormatError(ValueError):
    """A memory snapshot file could not be parsed."""
