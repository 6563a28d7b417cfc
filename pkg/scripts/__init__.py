"""
Command-line scripts for the permuton toolkit
=============================================

PURPOSE:
Entry points run from the project root.

SCRIPTS INCLUDED:
- cli.py: the `permuton` command (dist, star, density, approx, lowdisc,
  fractal, brownian, gw, decay, validate)
- run_tests.py: test-suite runner

USAGE:
    python scripts/cli.py dist --a builtin:figure1 --b perm:12348765
    python scripts/run_tests.py fast
"""

__version__ = "1.0.0"
