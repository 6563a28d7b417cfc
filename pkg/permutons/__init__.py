"""
Permuton Approximation Toolkit
==============================

PURPOSE:
Exact rectangular distance and star discrepancy between permutons and
permutations, constructions of approximating permutations with
certificates, and the structured permutons (curve-supported, self-similar,
biased Brownian separable) they are tested against.

MODULES:
- core: permutations, rectangles, composite measures and builtins
- grid / metrics: discretization and the exact distance engine
- lowdisc: Hammersley points, regularization, sampling
- optimize: D_n search, local search, Holder witnesses, decay tables
- selfsimilar: fractal inflation, Brownian builder, Galton-Watson oracle
"""

__version__ = "1.0.0"
