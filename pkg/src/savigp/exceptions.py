"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, DataError exits 2
and NumericalError exits 3.
"""


class SavigpError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SavigpError):
    """Inconsistent shapes, indices out of range, or invalid settings."""


class DataError(SavigpError):
    """Malformed input data (ragged CSV, NaN cells, out-of-support targets)."""


class NumericalError(SavigpError):
    """A numerical operation failed beyond recovery."""


class IllConditionedKernelError(NumericalError):
    """Cholesky factorization failed even after jitter escalation."""
