"""Exception types shared across the package."""

from __future__ import annotations


class DissipativeError(Exception):
    """Base class for all package errors."""


class ArgumentError(DissipativeError, ValueError):
    """Invalid argument passed to a constructor or operation."""


class ConfigError(ArgumentError):
    """Malformed or inconsistent run configuration."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class AdmissibilityError(DissipativeError, ValueError):
    """A state left the admissible set at some quadrature point.

    ``x`` holds the offending coordinate and ``values`` the field values there.
    """

    def __init__(self, message, x=None, values=None):
        self.x = x
        self.values = values
        super().__init__(message)


class NewtonDivergence(DissipativeError, RuntimeError):
    """Newton iteration failed to reach the requested residual tolerance."""

    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(message)


class SingularMatrixError(DissipativeError, RuntimeError):
    """A linear system that should be regular turned out singular."""
