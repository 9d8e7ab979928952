"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ValidationError -> 2, DataError -> 3.
"""


class GraphlocError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GraphlocError):
    """Invalid values, invariant violations, or bad configuration."""


class DataError(GraphlocError):
    """Missing, malformed, or inconsistent data files."""
