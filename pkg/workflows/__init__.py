"""
Workflows Package for the Permuton Toolkit
==========================================

PURPOSE:
What happens around a computation once the CLI has asked for it.

MODULES:
- exception_handler: maps library errors to resolutions and exit codes
- reporting: output documents, CSV reports and console summaries

ADAPTATION GUIDE:
🔧 To add an output format:
1. Add it to OutputFormat in permutons/contracts.py
2. Render it in reporting.py
"""

from .exception_handler import EXIT_CODES, ExceptionHandler, ExceptionResolution, exit_code_for
from .reporting import CSV_HEADER, ReportRow, build_output, emit_report, read_report, write_output

__all__ = [
    "EXIT_CODES",
    "ExceptionHandler",
    "ExceptionResolution",
    "exit_code_for",
    "CSV_HEADER",
    "ReportRow",
    "build_output",
    "emit_report",
    "read_report",
    "write_output",
]
