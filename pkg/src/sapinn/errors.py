"""Exception types shared across the package."""


class SapinnError(Exception):
    """Base class for all package errors."""


class StructuralError(SapinnError, ValueError):
    """Mismatched containers: nodes from different tapes, length mismatches."""


class DomainError(SapinnError, ValueError):
    """An argument lies outside the set the operation is defined on."""


class ContractError(SapinnError, RuntimeError):
    """An operation was called in a state its contract forbids."""


class NumericError(SapinnError, FloatingPointError):
    """A non-finite value appeared where a finite one is required."""


class SolverError(SapinnError, RuntimeError):
    """A reference solver or quadrature failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(SapinnError, ValueError):
    """A run configuration is inconsistent or unreadable."""
