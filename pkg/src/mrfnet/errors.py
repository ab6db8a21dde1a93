"""Exception types shared across the package."""


class MrfError(Exception):
    """Base class for package errors."""


class CapacityError(MrfError, ValueError):
    """Requested computation exceeds a hard size limit."""


class PreconditionError(MrfError, ValueError):
    """Inputs violate an algorithmic precondition (e.g. attractiveness)."""


class SamplerTimeoutError(MrfError, RuntimeError):
    """Coupling from the past failed to coalesce within the epoch budget."""

    def __init__(self, message, deepest_start=None):
        super().__init__(message)
        self.deepest_start = deepest_start


class NumericalError(MrfError, ArithmeticError):
    """Non-finite values encountered during optimisation or estimation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(MrfError, ValueError):
    """Invalid experiment or CLI configuration."""
