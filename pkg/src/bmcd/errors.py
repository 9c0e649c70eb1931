"""Exception hierarchy shared across the package."""
from __future__ import annotations

from typing import Any


class BmcdError(Exception):
    """Base class for all package errors."""

    code = "ERROR"


class InvalidParameterError(BmcdError, ValueError):
    code = "INVALID_PARAMS"


class MeanUndefinedError(BmcdError, ValueError):
    """Raised when a moment or tail integral is requested for xi >= 1."""

    code = "MEAN_UNDEFINED"


class InsufficientDataError(BmcdError, ValueError):
    code = "INSUFFICIENT_DATA"


class NonConvergedError(BmcdError):
    """An iterative solver failed its tolerance; ``best`` holds the best candidate found."""

    code = "NON_CONVERGED"

    def __init__(self, message: str, best: Any = None):
        super().__init__(message)
        self.best = best


class SingularMatrixError(BmcdError):
    code = "SINGULAR"

    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(message)
        self.condition = condition


class ParseError(BmcdError, ValueError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
