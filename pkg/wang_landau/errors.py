from __future__ import annotations


class WangLandauError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(WangLandauError, ValueError):
    """Invalid parameters or experiment configuration."""

    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field

    def __str__(self) -> str:
        message = super().__str__()
        if self.field:
            return f"{self.field}: {message}"
        return message


class UnsupportedError(ConfigurationError):
    pass


class DomainError(WangLandauError, ValueError):
    """A point or vector lies outside the domain an operation is defined on."""


class DriftError(WangLandauError, ValueError):
    """The bounding chain drifts upwards, the hitting time may be infinite."""


class CouplingError(WangLandauError, ValueError):
    """The supplied conditional law cannot be dominated by the bounding chain."""


class TraceFormatError(WangLandauError, ValueError):
    pass


class DiagnosticError(WangLandauError, RuntimeError):
    pass


class NumericalError(WangLandauError, RuntimeError):
    """Penalties became non-finite during a run."""
