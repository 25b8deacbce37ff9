"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters, budgets or dataset settings."""


class UsageError(ValueError):
    """An API was called with arguments that violate its contract."""


class DataError(ValueError):
    """A data source could not be read or parsed."""


class OptimizationError(RuntimeError):
    """An optimizer received unusable input (e.g. a non-finite gradient)."""


class RunAborted(RuntimeError):
    """A training run stopped early; ``records`` holds the trace up to the failure."""

    def __init__(self, message, records=()):
        super().__init__(message)
        self.records = list(records)
