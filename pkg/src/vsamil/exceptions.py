"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class VsamilError(Exception):
    """Base class for all package errors."""


class ConfigError(VsamilError):
    """Invalid configuration or command usage."""


class DataError(VsamilError):
    """Malformed or inconsistent dataset input."""


class NumericalError(VsamilError):
    """Numerical failure (non-finite loss, degenerate state) during a run."""
