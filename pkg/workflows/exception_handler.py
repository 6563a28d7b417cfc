"""
Exception Handler for the Permuton Toolkit
==========================================

PURPOSE:
Turns any exception raised while running a command into a structured
resolution: what went wrong, which category it belongs to and the process
exit code the CLI should return.

ADAPTATION GUIDE:
🔧 To add an error type:
1. Subclass PermutonError in permutons/exceptions.py with a ``category``
2. Only touch EXIT_CODES below when adding a new category

EXCEPTION CATEGORIES:
1. usage: bad flags, malformed files, invalid measures or permutations (exit 1)
2. computation: valid input the engine cannot finish, e.g. an empty growth
   window or an oversized grid (exit 2)
3. anything unexpected is treated as a computation failure (exit 2)
"""

import logging
import traceback
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import click

from permutons.exceptions import PermutonError

logger = logging.getLogger(__name__)

# 🔧 ADAPT: category -> exit code
EXIT_CODES = {
    "usage": 1,
    "computation": 2,
}


@dataclass
class ExceptionResolution:
    """
    Structured resolution for an exception.

    Contains the exit code and the message shown to the user.
    """

    error_type: str
    category: str
    exit_code: int
    message: str
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for logging and JSON error output."""
        return {
            "error_type": self.error_type,
            "category": self.category,
            "exit_code": self.exit_code,
            "message": self.message,
            "details": {k: v for k, v in self.details.items() if v is not None},
        }


class ExceptionHandler:
    """
    Maps exceptions to resolutions and keeps a history of what it resolved.

    INTEGRATION:
    Used by scripts/cli.py around every subcommand.
    """

    def __init__(self):
        self.exception_history: List[ExceptionResolution] = []

    def resolve(self, exc: BaseException) -> ExceptionResolution:
        if isinstance(exc, PermutonError):
            resolution = ExceptionResolution(
                error_type=type(exc).__name__,
                category=exc.category,
                exit_code=EXIT_CODES.get(exc.category, 2),
                message=exc.message,
                details=dict(exc.details),
            )
        elif isinstance(exc, click.ClickException):
            # UsageError, BadParameter and friends
            resolution = ExceptionResolution(
                error_type=type(exc).__name__, category="usage", exit_code=1, message=exc.format_message()
            )
        elif isinstance(exc, (ValueError, TypeError)):
            # library argument checks
            resolution = ExceptionResolution(
                error_type=type(exc).__name__, category="usage", exit_code=1, message=str(exc)
            )
        else:
            logger.debug("unexpected failure:\n%s", "".join(traceback.format_exception(type(exc), exc, exc.__traceback__)))
            resolution = ExceptionResolution(
                error_type=type(exc).__name__, category="computation", exit_code=2, message=str(exc) or repr(exc)
            )
        self._log_exception(resolution)
        return resolution

    def _log_exception(self, resolution: ExceptionResolution) -> None:
        self.exception_history.append(resolution)
        logger.error("%s: %s", resolution.error_type, resolution.message)

    def get_exception_statistics(self) -> Dict[str, Any]:
        by_category: Dict[str, int] = {}
        for resolution in self.exception_history:
            by_category[resolution.category] = by_category.get(resolution.category, 0) + 1
        return {"total_exceptions": len(self.exception_history), "by_category": by_category}


def exit_code_for(exc: Optional[BaseException]) -> int:
    """0 for no exception, otherwise the resolved exit code."""
    if exc is None:
        return 0
    return ExceptionHandler().resolve(exc).exit_code
