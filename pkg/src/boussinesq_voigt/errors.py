"""Exception hierarchy shared by every module."""


class BoussinesqError(Exception):
    """Base class for all errors raised by the package."""


class ConfigurationError(BoussinesqError, ValueError):
    """Invalid grid, parameter, axis or file layout."""


class UnsupportedConfigurationError(ConfigurationError):
    """The requested operation is not defined for this parameter set."""


class UnsupportedDimensionError(UnsupportedConfigurationError):
    pass


class InvariantViolationError(BoussinesqError, ValueError):
    """An input breaks a structural invariant (mean-zero, divergence-free)."""


class NumericalFaultError(BoussinesqError, FloatingPointError):
    """Non-finite values appeared during a computation.

    ``step`` and ``diagnostic`` carry the context of the failure when known.
    """

    def __init__(self, message, step=None, diagnostic=None):
        super().__init__(message)
        self.step = step
        self.diagnostic = diagnostic

    def __str__(self):
        msg = super().__str__()
        ctx = []
        if self.step is not None:
            ctx.append(f"step={self.step}")
        if self.diagnostic is not None:
            ctx.append(f"diagnostic={self.diagnostic}")
        return f"{msg} ({', '.join(ctx)})" if ctx else msg
