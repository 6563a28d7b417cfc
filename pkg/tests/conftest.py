"""
Shared fixtures for the permuton test-suite.

Measures are rebuilt per test (they are cheap and immutable); the brute-force
helper scores a rectangle family directly from rect_mass so it shares no code
with the grid sweep it checks.
"""

import sys
from fractions import Fraction
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
project_root = Path(__file__).resolve().parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from permutons.core import (  # noqa: E402
    CompositeMeasure,
    Primitive,
    Rectangle,
    builtin,
    parse_permutation,
    rect_mass,
)


@pytest.fixture
def figure1():
    return builtin("figure1")


@pytest.fixture
def lebesgue():
    return builtin("lebesgue")


@pytest.fixture
def identity_graph():
    return builtin("identity_graph")


@pytest.fixture
def reverse_graph():
    return builtin("reverse_graph")


@pytest.fixture
def halves_swapped():
    """Diagonal of [0,1/2]x[1/2,1] and of [1/2,1]x[0,1/2]."""
    half = Fraction(1, 2)
    return CompositeMeasure(
        (
            Primitive.diagonal(0, half, half, 1, half, 1),
            Primitive.diagonal(half, 1, 0, half, half, 1),
        ),
        name="halves_swapped",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def perm(text: str):
    return parse_permutation(text)


def brute_force_rect_distance(mu, nu, coordinates):
    """max |mu(R) - nu(R)| over closed rectangles with corners in ``coordinates``."""
    points = sorted(set(Fraction(c) for c in coordinates))
    best = Fraction(0)
    for a, b in combinations_with_replacement(points, 2):
        for c, d in combinations_with_replacement(points, 2):
            rect = Rectangle(a, b, c, d)
            best = max(best, abs(rect_mass(mu, rect) - rect_mass(nu, rect)))
    return best


@pytest.fixture
def brute_force():
    return brute_force_rect_distance
