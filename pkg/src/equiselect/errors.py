"""Exception hierarchy shared across the package.

ValidationError covers bad parameters or requests; DataError covers
malformed input data. The CLI maps them to exit codes 1 and 2, the HTTP
layer to 400 and 422 (BalanceError).
"""


class EquiselectError(Exception):
    """Base class for all package errors."""


class ValidationError(EquiselectError, ValueError):
    """A parameter or request is invalid for the given data."""


class DataError(EquiselectError, ValueError):
    """An input file or record violates the data contract."""


class BalanceError(ValidationError):
    """A balancing request cannot be satisfied, e.g. a zero-prevalence
    reference group or an unreachable budget."""
