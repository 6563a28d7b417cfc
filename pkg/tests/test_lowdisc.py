#!/usr/bin/env python3
"""
Test Suite for permutons.lowdisc
================================

PURPOSE:
Van der Corput and Hammersley points, regularization tie-breaking, exact
sampling from composite measures and the quantile construction.

HOW TO RUN:
    pytest tests/test_lowdisc.py -v
"""

from fractions import Fraction

import numpy as np
import pytest

from permutons.core import Permutation, parse_permutation, point_measure, step_permuton
from permutons.exceptions import InvalidMeasureError
from permutons.lowdisc import (
    PointSet,
    Sampler,
    hammersley,
    hammersley_constant,
    mu_random_permutation,
    quantile_permutation,
    quantile_points,
    read_patterns,
    regularization_gap,
    regularize,
    sample_point,
    van_der_corput,
)
from permutons.metrics import rect_distance

F = Fraction


@pytest.mark.parametrize(
    "i, expected",
    [(0, F(0)), (1, F(1, 2)), (2, F(1, 4)), (3, F(3, 4)), (6, F(3, 8)), (11, F(13, 16))],
)
def test_van_der_corput(i, expected):
    assert van_der_corput(i) == expected


def test_van_der_corput_rejects_negative():
    with pytest.raises(ValueError):
        van_der_corput(-1)


class TestPointSets:
    def test_hammersley_points(self):
        assert hammersley(4).points == ((0, 0), (F(1, 4), F(1, 2)), (F(1, 2), F(1, 4)), (F(3, 4), F(3, 4)))
        with pytest.raises(ValueError):
            hammersley(0)

    def test_regularized_hammersley(self):
        assert regularize(hammersley(4)) == parse_permutation("1324")
        assert regularize(hammersley(8)) == parse_permutation("15372648")

    def test_ties_in_x_follow_input_order(self):
        assert regularize(PointSet(((0, F(1, 2)), (0, 0)))) == parse_permutation("21")

    def test_ties_in_y_follow_x_order(self):
        points = PointSet(((F(1, 2), F(1, 2)), (0, F(1, 2))))
        assert regularize(points) == parse_permutation("12")

    def test_points_outside_the_square(self):
        with pytest.raises(ValueError):
            PointSet(((F(3, 2), 0),))

    def test_repeated_points_stack(self):
        mu = PointSet(((F(1, 2), F(1, 2)), (F(1, 2), F(1, 2)), (1, 0))).to_measure()
        masses = sorted(atom.mass for atom in mu.atoms)
        assert masses == [F(1, 3), F(2, 3)]

    def test_hammersley_constant(self):
        assert hammersley_constant(1) == 0
        assert hammersley_constant(8) > 0

    def test_regularization_gap_bound(self):
        gap = regularization_gap(hammersley(8))
        assert gap.holds
        assert gap.bound == (2 * gap.constant + 3) / 8


class TestSampling:
    def test_sample_point_is_reproducible(self, lebesgue):
        first = sample_point(lebesgue, 7)
        assert first == sample_point(lebesgue, 7)
        assert all(isinstance(v, Fraction) and 0 <= v <= 1 for v in first)

    def test_samples_stay_on_the_support(self, identity_graph, reverse_graph):
        x, y = sample_point(identity_graph, 3)
        assert x == y
        x, y = sample_point(reverse_graph, 3)
        assert x + y == 1

    def test_sampler_respects_primitive_regions(self, figure1, rng):
        sampler = Sampler(figure1)
        xs, ys = sampler.draw(500, rng)
        half = sampler.denominator // 2
        lower = xs < half
        assert np.all(ys[lower] == xs[lower])
        assert np.all(ys[~lower] >= half)

    def test_random_permutations_of_graphs(self, identity_graph, reverse_graph):
        assert mu_random_permutation(identity_graph, 6, 1) == Permutation.identity(6)
        assert mu_random_permutation(reverse_graph, 6, 1) == parse_permutation("654321")

    def test_random_permutation_is_reproducible(self, lebesgue):
        assert mu_random_permutation(lebesgue, 12, 42) == mu_random_permutation(lebesgue, 12, 42)

    def test_random_permutation_rejects_bad_input(self, lebesgue):
        with pytest.raises(ValueError):
            mu_random_permutation(lebesgue, 0, 1)
        with pytest.raises(InvalidMeasureError):
            mu_random_permutation(point_measure(parse_permutation("12")), 2, 1)

    def test_read_patterns(self):
        xs = np.array([[1, 2, 3], [3, 1, 2]])
        ys = np.array([[1, 3, 2], [1, 2, 3]])
        ranks = read_patterns(xs, ys)
        assert ranks.tolist() == [[0, 2, 1], [1, 2, 0]]


class TestQuantile:
    def test_quantile_points_on_identity(self, identity_graph):
        assert quantile_points(identity_graph, 2).points == ((F(1, 4), F(1, 4)), (F(3, 4), F(3, 4)))

    def test_graphs(self, identity_graph, reverse_graph):
        assert quantile_permutation(identity_graph, 5) == Permutation.identity(5)
        assert quantile_permutation(reverse_graph, 5) == parse_permutation("54321")

    def test_halves_swapped(self, halves_swapped):
        pi = quantile_permutation(halves_swapped, 8)
        assert pi == parse_permutation("56781234")
        assert rect_distance(halves_swapped, step_permuton(pi)).value == F(1, 16)

    def test_needs_diagonal_support(self, figure1):
        with pytest.raises(InvalidMeasureError):
            quantile_permutation(figure1, 4)
