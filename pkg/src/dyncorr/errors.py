"""Exception taxonomy shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 1, ``DataError``
subclasses exit 2, ``NumericError`` subclasses exit 3.
"""


class DyncorrError(Exception):
    """Base class for all toolkit errors."""


class DataError(DyncorrError):
    """Invalid, inconsistent, or degenerate input data (exit code 2)."""


class ParseError(DataError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(DataError):
    """Input violates a structural invariant (duplicates, bad shapes, ...)."""


class ImputationError(DataError):
    """A gene cannot be imputed (e.g. all of its values are missing)."""


class EmptyResultError(DataError):
    """An operation removed or matched everything, leaving nothing to work on."""


class NumericError(DyncorrError):
    """Numerical failure: degenerate statistics, solver breakdown (exit code 3)."""
