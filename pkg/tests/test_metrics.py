#!/usr/bin/env python3
"""
Test Suite for permutons.metrics
================================

PURPOSE:
Exact rectangular distance and star discrepancy on hand-computed pairs,
agreement with a brute-force rectangle oracle, the interval fallback and
pattern densities of permutations and permutons.

HOW TO RUN:
    pytest tests/test_metrics.py -v
"""

from fractions import Fraction
from itertools import combinations

import pytest

from config.base_config import settings
from permutons.core import (
    SYMMETRIES,
    Permutation,
    Rectangle,
    builtin,
    parse_permutation as perm,
    point_measure,
    step_permuton,
    transform,
)
from permutons.exceptions import (
    EnumerationLimitError,
    InternalError,
    InvalidMeasureError,
    PatternSizeError,
)
from permutons.grid import merged_difference_grid
from permutons.metrics import (
    DistanceMode,
    DistanceResult,
    Pattern,
    brute_force_grid_distance,
    grid_block_distance,
    star_rect_sandwich,
    pattern_density_measure,
    pattern_density_perm,
    rect_distance,
    rect_distance_interval,
    star_discrepancy,
    step_point_sandwich,
)

F = Fraction


def square(lo, hi):
    return Rectangle(lo, hi, lo, hi)


class TestRectDistance:
    def test_figure1_against_12348765(self, figure1):
        result = rect_distance(figure1, step_permuton(perm("12348765")))
        assert result.value == F(5, 32)
        assert result.witness == square(F(7, 16), F(3, 4))
        assert result.mode is DistanceMode.EXACT
        assert result.attained

    def test_grid_only_misses_the_diagonal_optimum(self, figure1):
        result = grid_block_distance(figure1, step_permuton(perm("12348765")))
        assert result.value == F(1, 8)
        assert result.witness == square(F(1, 2), F(3, 4))

    def test_lebesgue_against_21(self, lebesgue):
        result = rect_distance(lebesgue, step_permuton(perm("21")))
        assert result.value == F(1, 4)
        assert result.witness == square(0, F(1, 2))

    def test_identity_graph_against_1234(self, identity_graph):
        result = rect_distance(identity_graph, step_permuton(perm("1234")))
        assert result.value == F(1, 8)
        assert result.witness == square(F(1, 8), F(3, 8))

    def test_figure1_against_12345768(self, figure1):
        result = rect_distance(figure1, step_permuton(perm("12345768")))
        assert result.value == F(1, 8)
        assert result.witness == square(F(5, 8), F(7, 8))

    def test_figure1_against_identity(self, figure1):
        assert rect_distance(figure1, step_permuton(perm("12345678"))).value == F(1, 8)

    def test_reverse_graph(self, reverse_graph):
        result = rect_distance(reverse_graph, step_permuton(perm("21")))
        assert result.value == F(1, 4)
        assert result.witness == square(F(1, 4), F(3, 4))
        assert rect_distance(reverse_graph, step_permuton(perm("12"))).value == F(1, 2)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 8])
    def test_identity_graph_against_identity(self, identity_graph, n):
        assert rect_distance(identity_graph, step_permuton(Permutation.identity(n))).value == F(1, 2 * n)

    @pytest.mark.parametrize(
        "text, expected",
        [("132", F(5, 12)), ("213", F(5, 12)), ("231", F(1, 3)), ("312", F(1, 3)), ("321", F(5, 12))],
    )
    def test_identity_graph_against_size_three(self, identity_graph, text, expected):
        assert rect_distance(identity_graph, step_permuton(perm(text))).value == expected

    def test_zero_distance(self, lebesgue):
        result = rect_distance(lebesgue, lebesgue)
        assert result.value == 0

    def test_symmetric_in_its_arguments(self, figure1):
        nu = step_permuton(perm("12348765"))
        assert rect_distance(nu, figure1).value == rect_distance(figure1, nu).value

    @pytest.mark.parametrize("symmetry", sorted(SYMMETRIES))
    def test_invariant_under_symmetries(self, figure1, symmetry):
        nu = step_permuton(perm("12348765"))
        assert rect_distance(transform(figure1, symmetry), transform(nu, symmetry)).value == F(5, 32)

    def test_result_serializes_as_rationals(self, figure1):
        data = rect_distance(figure1, step_permuton(perm("12348765"))).to_dict()
        assert data["value"] == "5/32"
        assert data["witness"] == ["7/16", "3/4", "7/16", "3/4"]
        assert data["mode"] == "exact"


class TestAgainstBruteForce:
    @pytest.mark.parametrize("text", ["1", "21", "231", "3142", "25314", "426153"])
    def test_step_against_lebesgue(self, lebesgue, brute_force, text):
        pi = perm(text)
        nu = step_permuton(pi)
        coordinates = [F(k, pi.n) for k in range(pi.n + 1)]
        assert rect_distance(lebesgue, nu).value == brute_force(lebesgue, nu, coordinates)

    def test_random_step_pairs(self, rng, brute_force):
        for _ in range(5):
            a = Permutation(tuple(int(v) + 1 for v in rng.permutation(5)))
            b = Permutation(tuple(int(v) + 1 for v in rng.permutation(3)))
            mu, nu = step_permuton(a), step_permuton(b)
            coordinates = [F(k, 15) for k in range(16)]
            expected = brute_force(mu, nu, coordinates)
            assert rect_distance(mu, nu).value == expected
            assert brute_force_grid_distance(merged_difference_grid(mu, nu)) == expected

    def test_points_against_step(self, brute_force):
        pi = perm("2413")
        mu, nu = point_measure(pi), step_permuton(pi)
        coordinates = [F(k, 4) for k in range(5)]
        assert rect_distance(mu, nu).value >= brute_force(mu, nu, coordinates)


class TestStarDiscrepancy:
    def test_figure1_against_12348765(self, figure1):
        result = star_discrepancy(figure1, step_permuton(perm("12348765")))
        assert result.value == F(1, 8)
        assert result.corner == (F(3, 4), F(3, 4))
        assert result.witness.a == 0 and result.witness.c == 0

    @pytest.mark.parametrize(
        "name, text, expected",
        [
            ("lebesgue", "21", F(1, 4)),
            ("identity_graph", "1234", F(1, 16)),
            ("figure1", "12345768", F(3, 32)),
            ("reverse_graph", "21", F(1, 8)),
        ],
    )
    def test_known_values(self, name, text, expected):
        assert star_discrepancy(builtin(name), step_permuton(perm(text))).value == expected

    @pytest.mark.parametrize("n, expected", [(2, F(1, 8)), (3, F(1, 12)), (4, F(1, 16))])
    def test_identity_graph_against_identity(self, identity_graph, n, expected):
        assert star_discrepancy(identity_graph, step_permuton(Permutation.identity(n))).value == expected

    def test_sandwich(self, figure1):
        star, rect = star_rect_sandwich(figure1, step_permuton(perm("12348765")))
        assert (star, rect) == (F(1, 8), F(5, 32))

    def test_step_point_sandwich(self):
        lower, value, upper = step_point_sandwich(perm("2413"))
        assert lower <= value <= upper


class TestIntervalMode:
    def test_aligned_measures_give_a_tight_interval(self, lebesgue):
        result = rect_distance_interval(lebesgue, step_permuton(perm("21")), 4)
        assert result.mode is DistanceMode.INTERVAL
        assert result.lower == result.upper == F(1, 4)

    def test_interval_brackets_the_exact_value(self, figure1):
        result = rect_distance_interval(figure1, step_permuton(perm("12348765")), 8)
        assert result.lower <= F(5, 32) <= result.upper
        assert result.to_dict()["lower"] == str(result.lower)

    def test_needs_two_cells(self, lebesgue):
        with pytest.raises(ValueError):
            rect_distance_interval(lebesgue, lebesgue, 1)

    def test_interval_result_invariant(self):
        with pytest.raises(InternalError):
            DistanceResult(F(1, 4), Rectangle.unit(), DistanceMode.INTERVAL, lower=F(1, 2), upper=F(1, 4))


class TestPatternDensity:
    def test_known_density(self):
        assert pattern_density_perm(perm("132"), perm("15342")) == F(1, 2)

    def test_pairs(self):
        assert pattern_density_perm(perm("12"), perm("15342")) == F(1, 2)
        assert pattern_density_perm(perm("21"), perm("15342")) == F(1, 2)

    def test_trivial_pattern(self):
        assert pattern_density_perm(perm("1"), perm("321")) == 1

    def test_fast_path_matches_enumeration(self, rng):
        pi = Permutation(tuple(int(v) + 1 for v in rng.permutation(9)))
        for sigma in ("123", "132", "213", "231", "312", "321"):
            pattern = perm(sigma)
            count = sum(
                1 for positions in combinations(range(1, 10), 3) if pi.pattern_of(positions) == pattern
            )
            assert pattern_density_perm(pattern, pi) == F(count, 84)

    def test_longer_patterns_enumerate(self):
        assert pattern_density_perm(perm("1234"), perm("12345")) == 1
        assert pattern_density_perm(perm("2143"), perm("12345")) == 0

    def test_pattern_too_long_for_permutation(self):
        with pytest.raises(PatternSizeError):
            pattern_density_perm(perm("1234"), perm("12"))

    def test_pattern_size_cap(self):
        with pytest.raises(PatternSizeError):
            Pattern(tuple(range(1, 10)))

    def test_enumeration_limit(self, monkeypatch):
        monkeypatch.setattr(settings, "exhaustive_limit", 3)
        with pytest.raises(EnumerationLimitError):
            pattern_density_perm(perm("1234"), perm("12345"))

    def test_measure_estimate_on_graphs(self, identity_graph, reverse_graph):
        assert pattern_density_measure(perm("12"), identity_graph, 2000, seed=3).mean == 1.0
        assert pattern_density_measure(perm("12"), reverse_graph, 2000, seed=3).mean == 0.0

    def test_measure_estimate_on_lebesgue(self, lebesgue):
        estimate = pattern_density_measure(perm("21"), lebesgue, 20000, seed=5)
        assert estimate.within(0.5, sigmas=4)
        assert estimate.samples == 20000

    def test_measure_estimate_on_figure1(self, figure1):
        estimate = pattern_density_measure(perm("132"), figure1, 40000, seed=11)
        assert estimate.within(5 / 24, sigmas=4)

    def test_measure_estimate_is_reproducible(self, lebesgue):
        a = pattern_density_measure(perm("231"), lebesgue, 5000, seed=9)
        b = pattern_density_measure(perm("231"), lebesgue, 5000, seed=9, threads=2)
        assert a.hits == b.hits

    def test_measure_estimate_rejects_bad_input(self, lebesgue):
        with pytest.raises(ValueError):
            pattern_density_measure(perm("12"), lebesgue, 0, seed=1)
        with pytest.raises(InvalidMeasureError):
            pattern_density_measure(perm("12"), point_measure(perm("12")), 10, seed=1)
