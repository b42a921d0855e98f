"""Exception types shared across the package."""


class HotmError(Exception):
    """Base class for package errors."""


class SingularityError(HotmError, ArithmeticError):
    """A formulation hit its singular locus (zero divisor, undefined angle)."""

    def __init__(self, message: str, element: str | None = None):
        super().__init__(message)
        self.element = element


class DomainAbortError(HotmError):
    """A mapped state left the hard safety radius of a transfer map."""

    def __init__(self, message: str, revolution: int | None = None,
                 variable: str | None = None):
        super().__init__(message)
        self.revolution = revolution
        self.variable = variable


class ConfigError(HotmError, ValueError):
    """Invalid or inconsistent run configuration."""


class IntegrationError(HotmError, RuntimeError):
    """Step-size underflow, step budget exhausted or missing event."""
