"""Typed errors shared across the package.

The CLI maps these onto exit codes (DataError -> 3, FitError -> 4); library
callers can catch them independently of numpy's own exceptions.
"""


class ImaxcalError(Exception):
    """Base class for package errors."""


class DataError(ImaxcalError):
    """Malformed, inconsistent, or out-of-contract input data."""


class FitError(ImaxcalError):
    """A calibrator fit was rejected or failed to produce a valid state."""
