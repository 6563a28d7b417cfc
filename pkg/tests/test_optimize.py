#!/usr/bin/env python3
"""
Test Suite for permutons.optimize
=================================

PURPOSE:
Best-approximation search (branch-and-bound against plain enumeration),
local search, Holder cusp witnesses and decay tables.

HOW TO RUN:
    pytest tests/test_optimize.py -v
    pytest tests/test_optimize.py -v -m "not slow"
"""

import logging
from fractions import Fraction

import pytest

from config.base_config import settings
from permutons.core import (
    CompositeMeasure,
    Permutation,
    Primitive,
    Rectangle,
    builtin,
    parse_permutation,
    point_measure,
    rect_mass,
    step_permuton,
)
from permutons.exceptions import EnumerationLimitError, InternalError, InvalidMeasureError
from permutons.metrics import rect_distance
from permutons.optimize import (
    ApproxCertificate,
    ApproxMethod,
    HolderSpec,
    StepEvaluator,
    decay_experiment,
    exact_dn,
    exhaustive_dn,
    heuristic_certificate,
    heuristic_permutation,
    holder_witness,
    integer_root,
    local_search_dn,
    neighbours,
    rational_power_floor,
)

F = Fraction


@pytest.fixture
def crossing_graphs():
    """Half the mass on each diagonal of the square."""
    return CompositeMeasure(
        (Primitive.diagonal(0, 1, 0, 1, F(1, 2), 1), Primitive.diagonal(0, 1, 0, 1, F(1, 2), -1)),
        name="crossing",
    )


class TestStepEvaluator:
    def test_matches_the_distance_engine(self, figure1, rng):
        evaluator = StepEvaluator(figure1, 5)
        for _ in range(6):
            pi = Permutation(tuple(int(v) + 1 for v in rng.permutation(5)))
            value, _ = evaluator.evaluate(pi.values)
            assert value == rect_distance(figure1, step_permuton(pi)).value

    def test_prefix_bound_never_exceeds_the_full_value(self, figure1):
        evaluator = StepEvaluator(figure1, 6)
        full, _ = evaluator.evaluate((3, 1, 2, 6, 4, 5))
        for j in range(1, 6):
            partial, _ = evaluator.evaluate((3, 1, 2, 6, 4, 5)[:j])
            assert partial <= full

    def test_rejects_non_permutons(self):
        with pytest.raises(InvalidMeasureError):
            StepEvaluator(point_measure(parse_permutation("12")), 2)
        with pytest.raises(ValueError):
            StepEvaluator(CompositeMeasure((Primitive.uniform(0, 1, 0, 1, 1),)), 0)

    def test_rejects_overlapping_diagonals(self, crossing_graphs):
        with pytest.raises(InvalidMeasureError):
            StepEvaluator(crossing_graphs, 3)


class TestExactSearch:
    @pytest.mark.parametrize(
        "name, n, expected",
        [("identity_graph", 2, F(1, 4)), ("identity_graph", 3, F(1, 6)), ("lebesgue", 1, 0), ("lebesgue", 2, F(1, 4))],
    )
    def test_small_values(self, name, n, expected):
        cert = exact_dn(builtin(name), n)
        assert cert.distance == expected
        assert cert.optimal
        assert cert.method is ApproxMethod.BRANCH_AND_BOUND

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_agrees_with_enumeration(self, figure1, n):
        searched = exact_dn(figure1, n, all_minimizers=True)
        enumerated = exhaustive_dn(figure1, n)
        assert searched.distance == enumerated.distance
        assert searched.permutation == enumerated.permutation
        assert set(searched.minimizers) == set(enumerated.minimizers)

    def test_result_does_not_depend_on_threads(self, figure1):
        one = exact_dn(figure1, 5, threads=1)
        two = exact_dn(figure1, 5, threads=2)
        assert (one.permutation, one.distance, one.expansions) == (two.permutation, two.distance, two.expansions)

    @pytest.mark.slow
    def test_figure1_at_eight(self, figure1):
        cert = exact_dn(figure1, 8, all_minimizers=True)
        assert cert.distance == F(1, 8)
        assert cert.permutation == parse_permutation("12345678")
        assert parse_permutation("12345768") in cert.minimizers
        assert cert.optimal

    def test_budget_exhaustion_is_reported(self, figure1, caplog):
        with caplog.at_level(logging.WARNING):
            cert = exact_dn(figure1, 6, budget=6)
        assert not cert.optimal
        assert "exhausted" in caplog.text
        assert cert.distance == rect_distance(figure1, step_permuton(cert.permutation)).value

    def test_enumeration_limit(self, figure1, monkeypatch):
        monkeypatch.setattr(settings, "exhaustive_limit", 10)
        with pytest.raises(EnumerationLimitError):
            exhaustive_dn(figure1, 4)

    def test_only_exact_methods_certify_optimality(self):
        with pytest.raises(InternalError):
            ApproxCertificate(
                Permutation.identity(2), F(1, 4), Rectangle.unit(), True, ApproxMethod.LOCAL_SEARCH
            )

    def test_certificate_serializes(self, identity_graph):
        data = exact_dn(identity_graph, 2).to_dict()
        assert data["distance"] == "1/4"
        assert data["permutation"] == [1, 2]
        assert data["method"] == "branch_and_bound"


class TestHeuristics:
    def test_neighbours_are_distinct(self):
        assert sorted(neighbours((1, 2, 3))) == [(1, 3, 2), (2, 1, 3), (3, 2, 1)]
        moves = neighbours((1, 2, 3, 4, 5))
        assert len(moves) == len(set(moves))
        assert (1, 2, 3, 4, 5) not in moves

    def test_quantile_certificate(self, halves_swapped):
        cert = heuristic_certificate(halves_swapped, 8, "quantile")
        assert cert.distance == F(1, 16)
        assert not cert.optimal

    def test_search_methods_are_not_constructive(self, figure1):
        with pytest.raises(ValueError):
            heuristic_permutation(figure1, 4, ApproxMethod.LOCAL_SEARCH)

    def test_local_search_is_an_upper_bound(self, figure1):
        exact = exact_dn(figure1, 5)
        cert = local_search_dn(figure1, 5, budget=400, seed=1)
        assert cert.distance >= exact.distance
        assert cert.distance == rect_distance(figure1, step_permuton(cert.permutation)).value
        assert cert.method is ApproxMethod.LOCAL_SEARCH
        assert not cert.optimal

    def test_local_search_is_reproducible(self, figure1):
        one = local_search_dn(figure1, 6, budget=300, seed=4, threads=1)
        two = local_search_dn(figure1, 6, budget=300, seed=4, threads=2)
        assert (one.permutation, one.distance) == (two.permutation, two.distance)

    def test_local_search_inits(self, lebesgue, caplog):
        assert local_search_dn(lebesgue, 4, init="identity", budget=50).n == 4
        with caplog.at_level(logging.WARNING):
            local_search_dn(lebesgue, 4, init="quantile", budget=50)
        assert "Hammersley" in caplog.text
        with pytest.raises(ValueError):
            local_search_dn(lebesgue, 4, init=Permutation.identity(3), budget=50)


class TestHolder:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            HolderSpec(F(1, 2), F(1, 2), 1, F(1, 2))
        with pytest.raises(ValueError):
            HolderSpec(F(1, 2), 1, 0, F(1, 2))
        with pytest.raises(ValueError):
            HolderSpec(2, 1, 1, F(1, 2))

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_lipschitz_cusp(self, identity_graph, n):
        pi = Permutation.identity(n)
        witness = holder_witness(HolderSpec(F(1, 2), 1, 1, F(1, 2)), pi)
        assert witness.t == F(1, 4 * n)
        assert witness.exact_t
        assert witness.bound == F(1, 16 * n)
        assert rect_mass(identity_graph, witness.rectangle) == 0
        assert rect_mass(step_permuton(pi), witness.rectangle) == witness.bound
        assert rect_distance(identity_graph, step_permuton(pi)).value >= witness.bound

    def test_square_root_cusp(self):
        witness = holder_witness(HolderSpec(F(1, 2), 1, F(1, 2), F(1, 2)), Permutation.identity(4))
        assert witness.t == F(1, 144)
        assert witness.exact_t

    def test_irrational_width_is_floored(self):
        witness = holder_witness(HolderSpec(F(1, 2), 1, F(2, 3), F(1, 2)), Permutation.identity(4))
        assert not witness.exact_t
        assert witness.t**2 <= F(3, 40) ** 3

    def test_integer_root(self):
        assert integer_root(27, 3) == 3
        assert integer_root(28, 3) is None
        assert integer_root(-1, 2) is None

    def test_rational_power_floor(self):
        assert rational_power_floor(F(1, 4), F(1, 2)) == (F(1, 16), True)
        value, exact = rational_power_floor(F(1, 2), F(2, 3))
        assert not exact
        assert value**2 <= F(1, 8) < (value + F(1, 2**32)) ** 2


class TestDecay:
    def test_quantile_on_identity_graph(self, identity_graph):
        table = decay_experiment(identity_graph, ["quantile", "hammersley_regularized"], [2, 4, 8], seed=3)
        assert len(table.rows) == 6
        quantile = [row for row in table.rows if row.method == "quantile"]
        assert [row.distance for row in quantile] == [F(1, 4), F(1, 8), F(1, 16)]
        assert all(row.seed == 3 for row in table.rows)
        assert table.slopes["quantile"]["log_distance_vs_log_n"] == pytest.approx(-1.0)
        assert table.measure == "identity_graph"

    def test_exact_rows_are_optimal(self, figure1):
        table = decay_experiment(figure1, [ApproxMethod.BRANCH_AND_BOUND, ApproxMethod.EXHAUSTIVE], [2, 3])
        assert all(row.optimal for row in table.rows)
        by_method = {}
        for row in table.rows:
            by_method.setdefault(row.method, []).append(row.distance)
        assert by_method["branch_and_bound"] == by_method["exhaustive"]
