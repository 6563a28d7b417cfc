"""
Permuton Error Types
====================

PURPOSE:
Exception hierarchy shared by every library module and by the CLI.

Each exception carries a ``category`` that the exception handler in
``workflows/exception_handler.py`` maps to a process exit code:

- ``usage``: the caller supplied something invalid (exit code 1)
- ``computation``: valid input, but the requested computation cannot be
  completed (exit code 2)
"""

from typing import Any, Dict, Optional


class PermutonError(Exception):
    """Base class for all library errors."""

    category = "computation"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class InvalidPermutationError(PermutonError):
    """Raised when a value sequence is not a bijection of {1..n}."""

    category = "usage"


class InvalidRectangleError(PermutonError):
    category = "usage"


class InvalidMeasureError(PermutonError):
    """Raised when primitives violate their invariants or a permuton check fails."""

    category = "usage"


class ExchangeSpecError(InvalidMeasureError):
    """Raised for interval-exchange specs that do not partition [0,1]."""


class PatternSizeError(PermutonError):
    category = "usage"


class EnumerationLimitError(PermutonError):
    """Raised when exact pattern counting would exceed the enumeration cap."""


class GridTooLargeError(PermutonError):
    """Raised when a merged grid exceeds the configured breakpoint limit."""


class GrowthWindowError(PermutonError):
    """Raised when the growth window admits no admissible next block size."""


class SizeBudgetError(PermutonError):
    """Raised when a construction would exceed its size budget."""


class MeasureFileError(PermutonError):
    """Raised for unreadable or malformed measure, permutation and point files."""

    category = "usage"

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        field: Optional[str] = None,
    ):
        location = []
        if path:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field {field}")
        full = f"{', '.join(location)}: {message}" if location else message
        super().__init__(full, {"path": path, "line": line, "field": field})
        self.path = path
        self.line = line
        self.field = field


class InternalError(PermutonError):
    """Raised when an internal consistency check fails."""
