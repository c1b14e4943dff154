"""Shared exception types."""


class DatasetError(ValueError):
    """Unreadable or structurally malformed dataset input."""


class ConfigError(ValueError):
    """Invalid configuration (poll schedules, model kinds, CLI flags)."""


class FitError(ValueError):
    """A fit cannot proceed (empty, degenerate, or single-class data)."""


class DegenerateDistributionError(FitError):
    """One-dimensional clustering input has no spread."""


class SchemaError(ValueError):
    """Column or key mismatch between fitted artifacts and their inputs."""


class MetricError(ValueError):
    """A metric is undefined for the given labels (e.g. single-class)."""


class SplitError(ValueError):
    """A dataset cannot be partitioned as requested."""
