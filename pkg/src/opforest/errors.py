"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: ConfigError -> 2,
DataError -> 3, anything else -> 4.
"""


class OpfError(Exception):
    """Base class for all package errors."""


class ConfigError(OpfError):
    """Invalid parameter or option combination."""


class DataError(OpfError):
    """Malformed, inconsistent, or out-of-contract input data."""


class DegenerateDataError(DataError):
    """Data on which an operation is mathematically undefined
    (e.g. all samples coincide, so the k-NN graph has zero diameter)."""
