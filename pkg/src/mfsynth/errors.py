"""Exception hierarchy shared by every stage of the pipeline.

The CLI maps these onto exit codes: configuration problems exit 2, data
problems exit 3 and numerical failures exit 4.
"""


class MFSError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(MFSError, ValueError):
    """Invalid run configuration or model parameters."""

    exit_code = 2


class ValidationError(ConfigError):
    """An argument violates its documented invariants."""


class DataError(MFSError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class GapError(DataError):
    pass


class OrderingError(DataError):
    pass


class AlignmentError(DataError):
    pass


class BoundaryError(DataError):
    """Requested data lies outside what the panel holds."""


class NumericalError(MFSError, ArithmeticError):
    exit_code = 4


class DegeneracyError(NumericalError):
    """A variance that must be positive collapsed to (near) zero."""
