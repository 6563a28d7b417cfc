"""
Low-Discrepancy Point Sets and Sampling
=======================================

PURPOSE:
Point sets with small star discrepancy, the point-set to permutation
regularization, exact sampling from composite measures and the quantile
construction for permutons supported on diagonal segments.

CORE LOGIC:
- ``hammersley(n)`` pairs i/n with the base-2 radical inverse of i.
- ``regularize`` reads a permutation left to right: sort by x (ties by input
  index), then rank the y values (ties by the x-order).
- Sampling picks a primitive with probability proportional to its mass and a
  uniform position inside it, quantized to k / 2**32. Coordinates are kept as
  integer numerators over one common denominator, so pattern reading is exact.

DRAW ORDER:
For ``count`` points: primitive indices first, then ``count`` x-quanta, then
``count`` y-quanta (drawn even where unused).

EXAMPLE USAGE:
    pi = regularize(hammersley(16))
    star_discrepancy(step_permuton(pi), builtin("lebesgue"))
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from permutons.core import (
    ONE,
    ZERO,
    CompositeMeasure,
    Permutation,
    Primitive,
    PrimitiveKind,
    builtin,
    common_denominator,
    point_measure,
    require_permuton,
    step_permuton,
    to_rational,
)
from permutons.exceptions import InvalidMeasureError
from permutons.grid import INT64_SAFE
from permutons.metrics import star_discrepancy
from permutons.rng import QUANTUM, SeedLike, draw_quanta, make_rng

logger = logging.getLogger(__name__)

Point = Tuple[Fraction, Fraction]


@dataclass(frozen=True)
class PointSet:
    """An ordered multiset of points in the unit square."""

    points: Tuple[Point, ...]

    def __post_init__(self):
        points = tuple((to_rational(x), to_rational(y)) for x, y in self.points)
        for x, y in points:
            if not (ZERO <= x <= ONE and ZERO <= y <= ONE):
                raise ValueError(f"point ({x}, {y}) lies outside the unit square")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def to_measure(self) -> CompositeMeasure:
        """mu_P: mass 1/|P| at every point, repeated points stacking."""
        weight = Fraction(1, len(self.points))
        masses = {}
        for point in self.points:
            masses[point] = masses.get(point, ZERO) + weight
        atoms = [Primitive.atom(x, y, mass) for (x, y), mass in sorted(masses.items())]
        return CompositeMeasure(tuple(atoms), name=f"points[{len(self.points)}]")


def van_der_corput(i: int) -> Fraction:
    """Base-2 radical inverse: reflect the binary digits of i about the point."""
    if i < 0:
        raise ValueError("van_der_corput needs i >= 0")
    bits = i.bit_length()
    reversed_bits = int(format(i, "b")[::-1], 2) if i else 0
    return Fraction(reversed_bits, 2**bits) if bits else ZERO


def hammersley(n: int) -> PointSet:
    if n < 1:
        raise ValueError("hammersley needs n >= 1")
    return PointSet(tuple((Fraction(i, n), van_der_corput(i)) for i in range(n)))


def _ranks_from_order(x_order: Sequence[int], ys: Sequence) -> Tuple[int, ...]:
    in_x_order = [ys[i] for i in x_order]
    y_order = sorted(range(len(in_x_order)), key=lambda k: (in_x_order[k], k))
    ranks = [0] * len(in_x_order)
    for rank, k in enumerate(y_order, start=1):
        ranks[k] = rank
    return tuple(ranks)


def pattern_of_points(points: Iterable[Point]) -> Permutation:
    """Pattern of a finite point list with ties broken by input index, then x-order."""
    points = list(points)
    if not points:
        raise ValueError("need at least one point")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_order = sorted(range(len(points)), key=lambda i: (xs[i], i))
    return Permutation(_ranks_from_order(x_order, ys))


def regularize(P: PointSet) -> Permutation:
    """pi(P): the permutation read from P left to right."""
    return pattern_of_points(P.points)


def read_patterns(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """
    Row-wise pattern reading for arrays of shape (samples, k).

    Returns 0-based ranks; row r equals sigma - 1 when the r-th sample reads
    as sigma. Stable sorts give the same tie-breaking as ``regularize``.
    """
    x_order = np.argsort(xs, axis=1, kind="stable")
    ys_sorted = np.take_along_axis(ys, x_order, axis=1)
    y_order = np.argsort(ys_sorted, axis=1, kind="stable")
    ranks = np.empty_like(y_order)
    rows = np.arange(xs.shape[0])[:, None]
    ranks[rows, y_order] = np.arange(xs.shape[1])[None, :]
    return ranks


class Sampler:
    """
    Exact sampler for a composite measure.

    Positions are numerators over ``denominator = D * 2**32`` where D is the
    common denominator of all primitive corners.
    """

    def __init__(self, mu: CompositeMeasure):
        self.mu = mu
        prims = mu.primitives
        corners = [v for p in prims for v in p.region.as_tuple()]
        base = common_denominator(corners)
        self.denominator = base * QUANTUM
        self.dtype = np.int64 if self.denominator < INT64_SAFE // 2 else object
        weights = np.array([float(p.mass) for p in prims], dtype=np.float64)
        self.probabilities = weights / weights.sum()

        def column(values):
            return np.array([int(v) for v in values], dtype=self.dtype)

        self.x0 = column(p.region.a * self.denominator for p in prims)
        self.y0 = column(p.region.c * self.denominator for p in prims)
        self.y1 = column(p.region.d * self.denominator for p in prims)
        self.width = column(p.region.width * base for p in prims)
        self.height = column(p.region.height * base for p in prims)
        self.kind = np.array(
            [
                0 if p.kind is PrimitiveKind.UNIFORM_RECT else (1 if p.sign == 1 else 2)
                if p.kind is PrimitiveKind.DIAGONAL_SEGMENT
                else 3
                for p in prims
            ],
            dtype=np.int64,
        )

    def draw(self, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        index = rng.choice(len(self.probabilities), size=count, p=self.probabilities)
        u1 = draw_quanta(rng, count).astype(self.dtype)
        u2 = draw_quanta(rng, count).astype(self.dtype)
        kind = self.kind[index]
        step_x = self.width[index] * u1
        xs = self.x0[index] + np.where(kind == 3, 0, step_x)
        ys = np.where(
            kind == 0,
            self.y0[index] + self.height[index] * u2,
            np.where(
                kind == 1,
                self.y0[index] + step_x,
                np.where(kind == 2, self.y1[index] - step_x, self.y0[index]),
            ),
        )
        return xs, ys


def sample_points(mu: CompositeMeasure, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """``count`` i.i.d. draws as integer numerators over a shared denominator."""
    return Sampler(mu).draw(count, rng)


def sample_point(mu: CompositeMeasure, rng: SeedLike) -> Point:
    require_permuton(mu)
    sampler = Sampler(mu)
    xs, ys = sampler.draw(1, make_rng(rng))
    return Fraction(int(xs[0]), sampler.denominator), Fraction(int(ys[0]), sampler.denominator)


def mu_random_permutation(mu: CompositeMeasure, k: int, rng: SeedLike) -> Permutation:
    """Pattern of k independent draws from mu."""
    if k < 1:
        raise ValueError("k must be >= 1")
    require_permuton(mu)
    xs, ys = sample_points(mu, k, make_rng(rng))
    ranks = read_patterns(xs.reshape(1, k), ys.reshape(1, k))[0]
    return Permutation(tuple(int(r) + 1 for r in ranks))


def quantile_points(mu: CompositeMeasure, n: int) -> PointSet:
    """
    One point per mass quantile (2j - 1) / (2n) along the diagonal support.

    Segments are ordered by their lower-left corner and the cumulative mass is
    inverted exactly inside the segment holding each target.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if any(p.kind is not PrimitiveKind.DIAGONAL_SEGMENT for p in mu.primitives):
        raise InvalidMeasureError(
            "quantile construction needs a measure made of diagonal segments only",
            {"measure": mu.name},
        )
    segments = sorted(mu.primitives, key=lambda p: (p.region.a, p.region.c))
    points: List[Point] = []
    cumulative = ZERO
    k = 0
    for j in range(1, n + 1):
        target = Fraction(2 * j - 1, 2 * n)
        while cumulative + segments[k].mass <= target and k < len(segments) - 1:
            cumulative += segments[k].mass
            k += 1
        seg = segments[k]
        x = seg.region.a + (target - cumulative) / seg.mass * seg.region.width
        points.append((x, seg.y_at(x)))
    return PointSet(tuple(points))


def quantile_permutation(mu: CompositeMeasure, n: int) -> Permutation:
    return regularize(quantile_points(mu, n))


def hammersley_constant(n: int) -> Fraction:
    """n * star(regularized Hammersley step permuton, lambda)."""
    pi = regularize(hammersley(n))
    value = star_discrepancy(step_permuton(pi), builtin("lebesgue")).value
    return n * value


@dataclass(frozen=True)
class RegularizationGap:
    constant: Fraction
    gap: Fraction
    bound: Fraction

    @property
    def holds(self) -> bool:
        return self.gap < self.bound


def regularization_gap(P: PointSet, constant: Optional[Fraction] = None) -> RegularizationGap:
    """
    Compare mu_P with the point measure of pi(P).

    With C = n * star(mu_P, lambda) the gap star(mu_P, mu_pi(P)) stays below
    (2C + 3) / n.
    """
    n = len(P)
    mu_P = P.to_measure()
    if constant is None:
        constant = n * star_discrepancy(mu_P, builtin("lebesgue")).value
    gap = star_discrepancy(mu_P, point_measure(regularize(P))).value
    result = RegularizationGap(constant=constant, gap=gap, bound=(2 * constant + 3) / n)
    logger.debug("regularization gap n=%d: C=%s gap=%s bound=%s", n, constant, gap, result.bound)
    return result
