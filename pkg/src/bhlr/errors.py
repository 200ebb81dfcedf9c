"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A precondition on an argument was violated."""


class NotInBasis(LookupError):
    """An occupation vector does not belong to the requested sector."""


class NumericalFailure(RuntimeError):
    """An iterative method failed to reach its tolerance."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InsufficientData(ValueError):
    """Too few usable points for a fit."""


class ConfigError(ValueError):
    """Experiment configuration failed schema validation."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
