#!/usr/bin/env python3
"""
Test Suite for permutons.grid
=============================

PURPOSE:
Merged breakpoint grids: slot layout around atoms, exact cell masses that
tile rectangle masses, diagonal refinement and uniform coarsening.

HOW TO RUN:
    pytest tests/test_grid.py -v
"""

from fractions import Fraction

import pytest

from permutons.core import Primitive, builtin, parse_permutation, point_measure, rect_mass, step_permuton
from permutons.exceptions import GridTooLargeError
from permutons.grid import (
    Axis,
    SlotKind,
    check_grid_size,
    coarse_difference,
    coarsen,
    measure_grid,
    merged_axes,
    merged_difference_grid,
    refine_breakpoints,
)

F = Fraction


def test_axis_slots_around_atoms():
    axis = Axis((F(0), F(1, 2), F(1)), frozenset({F(1, 2)}))
    kinds = [slot.kind for slot in axis.slots]
    assert kinds == [SlotKind.OPEN, SlotKind.POINT, SlotKind.HALF_OPEN]
    assert axis.locate(F(1, 2)) == 1
    assert axis.locate(F(3, 4)) == 2
    assert axis.denominator == 2


def test_axis_with_atom_at_zero():
    axis = Axis((F(0), F(1)), frozenset({F(0)}))
    assert axis.slots[0].is_point
    assert len(axis) == 2


def test_difference_grid_tiles_rectangle_masses():
    mu = builtin("lebesgue")
    nu = step_permuton(parse_permutation("21"))
    grid = merged_difference_grid(mu, nu)
    assert grid.shape == (2, 2)
    assert grid.total() == 0
    for i0 in range(2):
        for i1 in range(i0, 2):
            for j0 in range(2):
                for j1 in range(j0, 2):
                    rect = grid.block_rectangle(i0, i1, j0, j1)
                    expected = rect_mass(mu, rect) - rect_mass(nu, rect)
                    assert grid.block_sum(i0, i1, j0, j1) == expected


def test_difference_grid_with_atoms():
    grid = merged_difference_grid(point_measure(parse_permutation("12")), builtin("lebesgue"))
    assert grid.shape == (4, 4)
    assert grid.total() == 0
    # point slot of 1/2 on both axes holds the whole atom
    assert grid.cell(1, 1) == F(1, 2)
    assert grid.cell(0, 0) == F(-1, 4)


def test_figure1_against_identity_step():
    grid = merged_difference_grid(builtin("figure1"), step_permuton(parse_permutation("12345678")))
    assert grid.total() == 0
    assert grid.has_diagonals
    assert grid.block_sum(0, 3, 0, 3) == 0


def test_measure_grid_is_unsigned():
    grid = measure_grid(builtin("figure1"))
    assert grid.total() == 1
    assert all(value >= 0 for row in grid.as_fractions() for value in row)


def test_refinement_adds_diagonal_images():
    diagonal = Primitive.diagonal(0, 1, 0, 1, 1, 1)
    xs, ys = refine_breakpoints([F(0), F(1, 3), F(1)], [F(0), F(1)], [diagonal])
    assert xs == [F(0), F(1, 3), F(1)]
    assert ys == [F(0), F(1, 3), F(1)]


def test_refinement_adds_crossings():
    x_axis, y_axis = merged_axes((builtin("identity_graph"), builtin("reverse_graph")), refine=True)
    assert F(1, 2) in x_axis.breakpoints
    assert F(1, 2) in y_axis.breakpoints


def test_refinement_limit():
    diagonal = Primitive.diagonal(0, 1, 0, 1, 1, -1)
    shifted = Primitive.diagonal(0, F(1, 2), F(1, 2), 1, F(1, 2), 1)
    with pytest.raises(GridTooLargeError):
        refine_breakpoints([F(0), F(1, 7), F(1)], [F(0), F(1)], [diagonal, shifted], limit=3)


def test_check_grid_size():
    axis = Axis((F(0), F(1, 3), F(2, 3), F(1)))
    check_grid_size(axis, axis, limit=3)
    with pytest.raises(GridTooLargeError) as info:
        check_grid_size(axis, axis, limit=2)
    assert info.value.details["limit"] == 2


class TestCoarsen:
    def test_lebesgue(self):
        coarse = coarsen(builtin("lebesgue"), 4)
        assert coarse.grid.shape == (4, 4)
        assert all(value == F(1, 16) for row in coarse.grid.as_fractions() for value in row)
        assert coarse.bound == 1
        assert coarse.aligned

    def test_figure1(self):
        coarse = coarsen(builtin("figure1"), 2)
        assert coarse.grid.as_fractions() == [[F(1, 2), 0], [0, F(1, 2)]]
        assert not coarse.aligned

    def test_difference_of_matching_coarsenings(self):
        a = coarsen(builtin("figure1"), 2)
        b = coarsen(step_permuton(parse_permutation("12")), 2)
        assert not coarse_difference(a, b).cells.any()

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            coarsen(builtin("lebesgue"), 0)
        with pytest.raises(ValueError):
            coarse_difference(coarsen(builtin("lebesgue"), 2), coarsen(builtin("lebesgue"), 3))
