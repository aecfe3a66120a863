"""Exception types shared across the package.

The CLI maps these onto exit codes, so library code should raise the most
specific one that applies rather than bare ValueError.
"""


class MmsurvError(Exception):
    """Base class for all package errors."""


class ConfigError(MmsurvError):
    """Invalid configuration, flag value, or argument combination."""


class DataError(MmsurvError):
    """Malformed, inconsistent, or degenerate input data."""


class NumericalError(MmsurvError):
    """Non-finite values or numerical failure during computation."""
