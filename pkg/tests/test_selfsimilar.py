#!/usr/bin/env python3
"""
Test Suite for permutons.selfsimilar
====================================

PURPOSE:
Inflation, growth plans and the fractal sequence, the truncated Brownian
builder and sampler, the two-point oracle and the Galton-Watson offspring law.

HOW TO RUN:
    pytest tests/test_selfsimilar.py -v
"""

import logging
import math
from fractions import Fraction

import numpy as np
import pytest

from config.base_config import settings
from permutons.core import CompositeMeasure, Permutation, Primitive, parse_permutation, validate_measure
from permutons.exceptions import GrowthWindowError, SizeBudgetError
from permutons.selfsimilar import (
    GrowthPlan,
    brownian_build,
    brownian_marginal_deviation,
    brownian_sample_perm,
    choose_sequence,
    fractal_level_bounds,
    fractal_permutation,
    fractal_sequence,
    gw_mean_offspring,
    gw_offspring,
    gw_offspring_batch,
    gw_offspring_estimate,
    gw_survival_estimate,
    inflate,
    leaf_measure,
    marginal_deviation,
    quantized_dirichlet,
    two_point_frequency,
    two_point_oracle,
)

F = Fraction


class TestInflation:
    def test_known_inflations(self):
        assert inflate(parse_permutation("21"), [parse_permutation("12")] * 2) == parse_permutation("3412")
        blocks = [parse_permutation("21"), parse_permutation("12"), parse_permutation("21")]
        assert inflate(parse_permutation("132"), blocks) == parse_permutation("215643")

    def test_block_count_must_match(self):
        with pytest.raises(ValueError):
            inflate(parse_permutation("12"), [parse_permutation("1")])


class TestGrowthPlans:
    def test_greedy_sequence(self):
        plan = choose_sequence(F(1, 2), 2, 1, 3, 3)
        assert plan.n_seq == (3, 4, 12)
        assert plan.N_seq == (3, 12, 144)
        assert plan.to_dict()["alpha"] == "1/2"

    def test_window_violation(self):
        with pytest.raises(GrowthWindowError):
            GrowthPlan(F(1, 2), 2, 1, (2, 100))

    def test_no_admissible_block(self):
        with pytest.raises(GrowthWindowError):
            choose_sequence(1, 1, 1, 2, 2)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            GrowthPlan(F(1, 2), 2, 1, (4, 3))
        with pytest.raises(ValueError):
            choose_sequence(F(1, 2), F(1, 2), F(1, 4), 3)
        with pytest.raises(ValueError):
            choose_sequence(F(1, 2), 2, 1, 1)

    def test_fractal_permutation(self):
        plan = GrowthPlan(F(1, 2), 2, 1, (2, 4))
        assert fractal_permutation(plan, 2) == parse_permutation("13245768")
        assert fractal_sequence(plan, 1) == [parse_permutation("12")]

    def test_fractal_levels_nest(self):
        plan = choose_sequence(F(1, 2), 2, 1, 3, 3)
        sequence = fractal_sequence(plan, 3)
        assert [pi.n for pi in sequence] == [3, 12, 144]

    def test_fractal_limits(self, monkeypatch):
        plan = choose_sequence(F(1, 2), 2, 1, 3, 3)
        with pytest.raises(ValueError):
            fractal_sequence(plan, 4)
        monkeypatch.setattr(settings, "max_fractal_size", 10)
        with pytest.raises(SizeBudgetError):
            fractal_permutation(plan, 3)

    def test_level_bounds_hold(self):
        constant, levels = fractal_level_bounds(GrowthPlan(F(1, 2), 2, 1, (2, 4)), 2)
        assert constant > 0
        assert len(levels) == 1
        assert all(level.holds for level in levels)

    def test_level_bound_is_a_certified_rational(self):
        plan = GrowthPlan(F(1, 2), 2, 1, (2, 4))
        constant, (level,) = fractal_level_bounds(plan, 2)
        assert isinstance(level.bound, Fraction)
        assert level.bound.denominator <= 2**64
        assert 0 < float(level.bound) <= 4 * constant * math.log(4) / 8 * (1 + 1e-12)


class TestBrownian:
    def test_build_is_a_permuton(self):
        build = brownian_build(F(1, 2), F(1, 10), 5, seed=7)
        assert brownian_marginal_deviation(build) == 0
        assert validate_measure(build.measure).ok
        assert build.tree.height() <= 5
        assert build.tolerance == F(1, 5)

    def test_build_is_reproducible(self):
        a = brownian_build(F(3, 4), F(1, 8), 4, seed=11)
        b = brownian_build(F(3, 4), F(1, 8), 4, seed=11)
        assert len(a.measure) == len(b.measure)
        assert a.measure.cdf(F(1, 3), F(2, 3)) == b.measure.cdf(F(1, 3), F(2, 3))
        assert a.tree.leaves() == b.tree.leaves()

    def test_degenerate_leaves(self):
        increasing = brownian_build(0, 1, 3, seed=0)
        assert increasing.tree.is_leaf
        assert brownian_sample_perm(increasing, 6, seed=2) == Permutation.identity(6)
        decreasing = brownian_build(1, 1, 3, seed=0)
        assert brownian_sample_perm(decreasing, 4, seed=2) == parse_permutation("4321")

    def test_leaf_mixes_both_diagonals(self):
        leaf = leaf_measure(F(1, 4))
        assert sorted((p.sign, p.mass) for p in leaf.primitives) == [(-1, F(1, 4)), (1, F(3, 4))]
        assert validate_measure(leaf).ok
        assert len(leaf_measure(0).primitives) == 1
        assert brownian_build(F(1, 4), 1, 3, seed=0).measure.primitives == leaf.primitives

    def test_node_masses_split_exactly(self):
        tree = brownian_build(F(1, 2), F(1, 4), 3, seed=5).tree
        assert not tree.is_leaf
        assert sum(child.mass for child in tree.children) == tree.mass == 1

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            brownian_build(2, F(1, 10), 3, seed=0)
        with pytest.raises(ValueError):
            brownian_build(F(1, 2), 0, 3, seed=0)
        with pytest.raises(ValueError):
            brownian_build(F(1, 2), F(1, 10), -1, seed=0)

    def test_sample_perm(self):
        build = brownian_build(F(1, 2), F(1, 10), 4, seed=3)
        pi = brownian_sample_perm(build, 7, seed=1)
        assert pi.n == 7
        assert pi == brownian_sample_perm(build, 7, seed=1)
        with pytest.raises(ValueError):
            brownian_sample_perm(build, 0, seed=1)

    def test_quantized_dirichlet(self, rng):
        for _ in range(20):
            parts = quantized_dirichlet(rng)
            assert sum(parts) == 1
            assert all(part > 0 for part in parts)

    def test_marginal_deviation_of_a_squeezed_measure(self):
        squeezed = CompositeMeasure((Primitive.uniform(0, F(1, 2), 0, 1, 1),))
        assert marginal_deviation(squeezed) == (F(1, 2), 0)


class TestTwoPointPattern:
    @pytest.mark.parametrize("p", [F(0), F(1, 4), F(1, 2), F(1)])
    def test_oracle(self, p):
        assert two_point_oracle(p) == 1 - p

    def test_oracle_solves_the_fixed_point(self):
        # separation probability 2 E[D1 D2] = 2/15 for Dirichlet(1/2, 1/2, 1/2)
        b = F(2, 15)
        for p in (F(1, 5), F(2, 3)):
            q = two_point_oracle(p)
            assert q == (1 - b) * q + b * (1 - p)

    def test_frequency_of_built_measures_matches_oracle(self):
        estimate = two_point_frequency(F(3, 10), 200, seed=1, pairs=10, eps=F(1, 4), depth_max=4)
        assert estimate.samples == 2000
        assert estimate.stderr > 0
        assert estimate.within(float(two_point_oracle(F(3, 10))))

    def test_frequency_without_coin_flips(self):
        estimate = two_point_frequency(0, 5, seed=3, pairs=4, eps=F(1, 2), depth_max=3)
        assert estimate.mean == 1.0
        with pytest.raises(ValueError):
            two_point_frequency(F(1, 2), 1, seed=3)


class TestGaltonWatson:
    def test_degenerate_offspring(self, rng):
        assert np.all(gw_offspring_batch(0, 5, rng) == 2)
        assert gw_offspring(1, 0) == 0
        assert gw_mean_offspring(0) == 2.0
        assert gw_mean_offspring(F(1, 2)) == 0.0

    def test_offspring_values(self, rng):
        z = gw_offspring_batch(F(1, 20), 1000, rng)
        assert set(np.unique(z)) <= {0, 1, 2}

    def test_mean_matches_simulation(self):
        r = F(1, 20)
        mean = gw_mean_offspring(r)
        assert 0 < mean < 2
        assert gw_offspring_estimate(r, 50000, seed=8).within(mean, sigmas=5)

    def test_mean_decreases_in_r(self):
        assert gw_mean_offspring(F(1, 100)) > gw_mean_offspring(F(1, 10)) > gw_mean_offspring(F(1, 4))

    def test_survival_extremes(self):
        assert gw_survival_estimate(0, 20, 5, seed=1).estimate == 1.0
        assert gw_survival_estimate(F(3, 5), 20, 5, seed=1).estimate == 0.0

    def test_survival_is_reproducible(self):
        a = gw_survival_estimate(F(1, 20), 50, 6, seed=4, threads=1)
        b = gw_survival_estimate(F(1, 20), 50, 6, seed=4, threads=2)
        assert a == b

    def test_population_cap(self, monkeypatch, caplog):
        monkeypatch.setattr(settings, "gw_population_cap", 4)
        with caplog.at_level(logging.WARNING):
            result = gw_survival_estimate(0, 10, 5, seed=1)
        assert result.capped == 10
        assert result.survived == 10
        assert "population cap" in caplog.text

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            gw_survival_estimate(F(1, 10), 0, 5, seed=1)
        with pytest.raises(ValueError):
            gw_offspring_estimate(F(1, 10), 0, seed=1)
