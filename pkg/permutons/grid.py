"""
Merged Breakpoint Grids
=======================

PURPOSE:
Turns one or two composite measures into a matrix of exact cell masses on a
merged breakpoint grid. This matrix is the input of every maximum-subrectangle
search in ``permutons.metrics``.

GRID MODEL:
Each axis is cut into *slots*:

- POINT  {v}        only where some atom sits at coordinate v
- OPEN   (u, v)     the interval just before an atom coordinate v
- HALF_OPEN (u, v]  every other interval between consecutive breakpoints

Slots partition [0,1] (the point 0 is only covered when an atom needs it; the
line x = 0 carries no mass otherwise), so cell masses tile exactly and a
contiguous block of slots is either a closed rectangle or a one-sided limit
of closed rectangles.

Cell values are stored as integers over one common ``scale``
(``value = cells[i, j] / scale``), int64 when the scale is small enough and
Python integers otherwise.

REFINEMENT:
With ``refine=True`` the breakpoints are closed under the maps of every
diagonal segment (and include crossings of opposite diagonals), so inside
each refined cell a diagonal runs from corner to corner.
"""

import logging
from bisect import bisect_left, bisect_right
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from math import lcm
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from config.base_config import settings
from permutons.core import (
    ONE,
    ZERO,
    CompositeMeasure,
    Primitive,
    PrimitiveKind,
    Rectangle,
    common_denominator,
)
from permutons.exceptions import GridTooLargeError

logger = logging.getLogger(__name__)

INT64_SAFE = 2**62


class SlotKind(Enum):
    POINT = "point"
    OPEN = "open"
    HALF_OPEN = "half_open"


@dataclass(frozen=True)
class Slot:
    lo: Fraction
    hi: Fraction
    kind: SlotKind

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def is_point(self) -> bool:
        return self.kind is SlotKind.POINT


@dataclass(frozen=True, eq=False)
class Axis:
    """Breakpoints of one axis and the slots they induce."""

    breakpoints: Tuple[Fraction, ...]
    atoms: FrozenSet[Fraction] = frozenset()
    slots: Tuple[Slot, ...] = field(init=False)
    denominator: int = field(init=False)

    def __post_init__(self):
        points = tuple(sorted(set(self.breakpoints) | {ZERO, ONE} | set(self.atoms)))
        object.__setattr__(self, "breakpoints", points)
        slots: List[Slot] = []
        if ZERO in self.atoms:
            slots.append(Slot(ZERO, ZERO, SlotKind.POINT))
        for lo, hi in zip(points, points[1:]):
            if hi in self.atoms:
                slots.append(Slot(lo, hi, SlotKind.OPEN))
                slots.append(Slot(hi, hi, SlotKind.POINT))
            else:
                slots.append(Slot(lo, hi, SlotKind.HALF_OPEN))
        object.__setattr__(self, "slots", tuple(slots))
        object.__setattr__(self, "denominator", common_denominator(points))
        object.__setattr__(self, "_los", [s.lo for s in slots])
        object.__setattr__(self, "_his", [s.hi for s in slots])
        object.__setattr__(
            self,
            "_interval_index",
            {(s.lo, s.hi): i for i, s in enumerate(slots) if not s.is_point},
        )
        object.__setattr__(
            self, "_point_index", {s.lo: i for i, s in enumerate(slots) if s.is_point}
        )

    def __len__(self) -> int:
        return len(self.slots)

    def lengths(self, dtype=np.int64) -> np.ndarray:
        """Slot lengths multiplied by the axis denominator."""
        values = [int(s.length * self.denominator) for s in self.slots]
        return np.array(values, dtype=dtype)

    def span(self, lo: Fraction, hi: Fraction) -> Tuple[int, int]:
        """Half-open index range of the slots contained in [lo, hi]."""
        return bisect_left(self._los, lo), bisect_right(self._his, hi)

    def overlapping(self, lo: Fraction, hi: Fraction) -> Tuple[int, int]:
        """Half-open index range of the slots meeting the open interval (lo, hi)."""
        return bisect_right(self._his, lo), bisect_left(self._los, hi)

    def interval_slot(self, lo: Fraction, hi: Fraction) -> int:
        return self._interval_index[(lo, hi)]

    def locate(self, value: Fraction) -> int:
        """Slot holding the coordinate: its point slot if any, else the slot with lo < value <= hi."""
        if value in self._point_index:
            return self._point_index[value]
        return max(0, bisect_left(self._his, value))

    def start_of(self, index: int) -> Fraction:
        return self.slots[index].lo if index < len(self.slots) else ONE

    def prefix(self, count: int) -> "Axis":
        """The first ``count`` slots as an axis of their own (used for partial grids)."""
        axis = object.__new__(Axis)
        slots = self.slots[:count]
        end = slots[-1].hi if slots else ZERO
        values = {
            "breakpoints": tuple(v for v in self.breakpoints if v <= end),
            "atoms": frozenset(v for v in self.atoms if v <= end),
            "slots": slots,
            "denominator": self.denominator,
            "_los": self._los[:count],
            "_his": self._his[:count],
            "_interval_index": {k: i for k, i in self._interval_index.items() if i < count},
            "_point_index": {k: i for k, i in self._point_index.items() if i < count},
        }
        for name, value in values.items():
            object.__setattr__(axis, name, value)
        return axis


def refine_breakpoints(
    xs: Iterable[Fraction],
    ys: Iterable[Fraction],
    diagonals: Sequence[Primitive],
    limit: Optional[int] = None,
) -> Tuple[List[Fraction], List[Fraction]]:
    """
    Close the breakpoint sets under every diagonal segment's maps.

    After closure, consecutive x-breakpoints inside a segment's x-projection map
    to consecutive y-breakpoints, so the segment crosses each refined cell from
    corner to corner.
    """
    limit = limit or settings.max_grid_breakpoints
    X, Y = set(xs), set(ys)
    queue_x, queue_y = deque(X), deque(Y)
    for s1, s2 in combinations(diagonals, 2):
        if s1.sign == s2.sign:
            continue
        up, down = (s1, s2) if s1.sign == 1 else (s2, s1)
        ru, rd = up.region, down.region
        x = (rd.d - ru.c + ru.a + rd.a) / 2
        if max(ru.a, rd.a) <= x <= min(ru.b, rd.b):
            y = up.y_at(x)
            if x not in X:
                X.add(x)
                queue_x.append(x)
            if y not in Y:
                Y.add(y)
                queue_y.append(y)
    while queue_x or queue_y:
        while queue_x:
            x = queue_x.popleft()
            for seg in diagonals:
                r = seg.region
                if r.a < x < r.b:
                    y = seg.y_at(x)
                    if y not in Y:
                        Y.add(y)
                        queue_y.append(y)
        while queue_y:
            y = queue_y.popleft()
            for seg in diagonals:
                r = seg.region
                if r.c < y < r.d:
                    x = seg.x_at(y)
                    if x not in X:
                        X.add(x)
                        queue_x.append(x)
        if len(X) > limit or len(Y) > limit:
            raise GridTooLargeError(
                f"refined grid exceeds {limit} breakpoints per axis",
                {"x": len(X), "y": len(Y), "limit": limit},
            )
    return sorted(X), sorted(Y)


def merged_axes(
    measures: Sequence[CompositeMeasure], refine: bool = False, extra_x=(), extra_y=()
) -> Tuple[Axis, Axis]:
    xs = {ZERO, ONE} | set(extra_x)
    ys = {ZERO, ONE} | set(extra_y)
    atoms_x, atoms_y = set(), set()
    diagonals: List[Primitive] = []
    for mu in measures:
        xs.update(mu.breakpoints_x)
        ys.update(mu.breakpoints_y)
        atoms_x.update(p.region.a for p in mu.atoms)
        atoms_y.update(p.region.c for p in mu.atoms)
        diagonals.extend(mu.diagonals)
    if refine and diagonals:
        xs, ys = refine_breakpoints(xs, ys, diagonals)
        logger.debug("refined grid: %d x %d breakpoints", len(xs), len(ys))
    return Axis(tuple(xs), frozenset(atoms_x)), Axis(tuple(ys), frozenset(atoms_y))


@dataclass
class CellTable:
    """Dense signed cell tables: total plus its uniform / diagonal / antidiagonal parts."""

    total: np.ndarray
    uniform: np.ndarray
    diagonal: np.ndarray
    antidiagonal: np.ndarray


class CellTableBuilder:
    """
    Exact integer cell masses of a signed sum of measures on fixed axes.

    CORE LOGIC:
    - uniform rectangles contribute rank-one blocks k * len_x[s] * len_y[r]
    - diagonal segments contribute k * len_x[s] to the single cell they cross
      in column s (axes must be refined for this)
    - atoms contribute their mass to the cell of their point slots

    Rows can be produced one at a time (``iter_rows``) so that very large grids
    never have to be materialized.
    """

    def __init__(self, x_axis: Axis, y_axis: Axis, terms: Sequence[Tuple[int, CompositeMeasure]]):
        self.x_axis = x_axis
        self.y_axis = y_axis
        Lx, Ly = x_axis.denominator, y_axis.denominator
        Lxy = lcm(Lx, Ly)
        rect_factors, diag_factors, atom_factors = [], [], []
        for sign, mu in terms:
            for p in mu.primitives:
                r = p.region
                if p.kind is PrimitiveKind.UNIFORM_RECT:
                    rect_factors.append((sign, p, p.mass / (r.width * r.height) / (Lx * Ly)))
                elif p.kind is PrimitiveKind.DIAGONAL_SEGMENT:
                    diag_factors.append((sign, p, p.mass / r.width / Lxy))
                else:
                    atom_factors.append((sign, p, p.mass))
        scale = 1
        for _, _, f in rect_factors + diag_factors + atom_factors:
            scale = lcm(scale, f.denominator)
        self.scale = scale
        biggest = max(
            [abs(f * scale) * Lx * Ly for _, _, f in rect_factors]
            + [abs(f * scale) * Lxy for _, _, f in diag_factors]
            + [Fraction(2 * scale)]
        )
        self.dtype = np.int64 if biggest < INT64_SAFE and 4 * scale < INT64_SAFE else object
        self.len_x = x_axis.lengths(self.dtype)
        self.len_y = y_axis.lengths(self.dtype)

        self.rects: List[Tuple[int, int, int, int, int]] = []
        for sign, p, f in rect_factors:
            r = p.region
            s0, s1 = x_axis.span(r.a, r.b)
            r0, r1 = y_axis.span(r.c, r.d)
            self.rects.append((s0, s1, r0, r1, sign * int(f * scale)))

        # column -> list of (row, integer mass, +1/-1); on refined axes each
        # diagonal meets exactly one row per column
        self.diag_cells: Dict[int, List[Tuple[int, int, int]]] = {}
        for sign, p, f in diag_factors:
            r = p.region
            k = sign * int(f * scale)
            s0, s1 = x_axis.span(r.a, r.b)
            for s in range(s0, s1):
                slot = x_axis.slots[s]
                if slot.is_point:
                    continue
                y_lo, y_hi = sorted((p.y_at(slot.lo), p.y_at(slot.hi)))
                r0, r1 = y_axis.overlapping(y_lo, y_hi)
                for row in range(r0, r1):
                    y_slot = y_axis.slots[row]
                    overlap = min(y_slot.hi, y_hi) - max(y_slot.lo, y_lo)
                    if overlap > 0:
                        self.diag_cells.setdefault(s, []).append(
                            (row, k * int(overlap * Lxy), p.sign)
                        )

        self.atom_cells: Dict[int, List[Tuple[int, int]]] = {}
        for sign, p, f in atom_factors:
            s = x_axis.locate(p.region.a)
            r = y_axis.locate(p.region.c)
            self.atom_cells.setdefault(s, []).append((r, sign * int(f * scale)))

        self._rect_starts: Dict[int, List[int]] = {}
        for idx, (s0, s1, _, _, _) in enumerate(self.rects):
            if s1 > s0:
                self._rect_starts.setdefault(s0, []).append(idx)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.x_axis), len(self.y_axis)

    def iter_rows(self) -> Iterator[Tuple[int, np.ndarray, List[Tuple[int, int, int, int]]]]:
        """
        Yield (s, total_row, diagonal_cells) for every x-slot in order.

        ``diagonal_cells`` lists (row, diagonal_mass, sign, uniform_mass) for the
        cells of this column crossed by a diagonal.
        """
        Ry = len(self.y_axis)
        active: List[int] = []
        for s in range(len(self.x_axis)):
            active = [i for i in active if self.rects[i][1] > s]
            active.extend(self._rect_starts.get(s, ()))
            row = np.zeros(Ry, dtype=self.dtype)
            lx = self.len_x[s]
            if lx:
                for i in active:
                    _, _, r0, r1, k = self.rects[i]
                    row[r0:r1] += (k * lx) * self.len_y[r0:r1]
            merged: Dict[Tuple[int, int], int] = {}
            for r, mass, sign in self.diag_cells.get(s, ()):
                merged[(r, sign)] = merged.get((r, sign), 0) + mass
            diagonal_cells = [
                (r, mass, sign, row[r]) for (r, sign), mass in sorted(merged.items()) if mass
            ]
            for r, mass, _ in self.diag_cells.get(s, ()):
                row[r] += mass
            for r, mass in self.atom_cells.get(s, ()):
                row[r] += mass
            yield s, row, diagonal_cells

    def dense(self) -> CellTable:
        shape = self.shape
        uniform = np.zeros(shape, dtype=self.dtype)
        for s0, s1, r0, r1, k in self.rects:
            if s1 > s0 and r1 > r0:
                uniform[s0:s1, r0:r1] += np.outer(k * self.len_x[s0:s1], self.len_y[r0:r1])
        diagonal = np.zeros(shape, dtype=self.dtype)
        antidiagonal = np.zeros(shape, dtype=self.dtype)
        for s, cells in self.diag_cells.items():
            for r, mass, sign in cells:
                if sign == 1:
                    diagonal[s, r] += mass
                else:
                    antidiagonal[s, r] += mass
        total = uniform + diagonal + antidiagonal
        for s, cells in self.atom_cells.items():
            for r, mass in cells:
                total[s, r] += mass
        return CellTable(total=total, uniform=uniform, diagonal=diagonal, antidiagonal=antidiagonal)


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """
    Signed (or unsigned) cell masses on a merged breakpoint grid.

    ``cells[i, j] / scale`` is the mass of x-slot i times y-slot j. The optional
    decomposition arrays split each cell into its uniform, diagonal (+1) and
    antidiagonal (-1) parts; atoms are the remainder.
    """

    x_axis: Axis
    y_axis: Axis
    cells: np.ndarray
    scale: int
    uniform: Optional[np.ndarray] = None
    diagonal: Optional[np.ndarray] = None
    antidiagonal: Optional[np.ndarray] = None

    @property
    def xs(self) -> Tuple[Fraction, ...]:
        return self.x_axis.breakpoints

    @property
    def ys(self) -> Tuple[Fraction, ...]:
        return self.y_axis.breakpoints

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cells.shape

    def cell(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.cells[i, j]), self.scale)

    def as_fractions(self) -> List[List[Fraction]]:
        return [[Fraction(int(v), self.scale) for v in row] for row in self.cells]

    def block_sum(self, i0: int, i1: int, j0: int, j1: int) -> Fraction:
        """Sum over x-slots i0..i1 and y-slots j0..j1 (inclusive)."""
        block = self.cells[i0 : i1 + 1, j0 : j1 + 1]
        return Fraction(int(block.sum()), self.scale)

    def total(self) -> Fraction:
        return Fraction(int(self.cells.sum()), self.scale)

    def block_rectangle(self, i0: int, i1: int, j0: int, j1: int) -> Rectangle:
        xs, ys = self.x_axis.slots, self.y_axis.slots
        return Rectangle(xs[i0].lo, xs[i1].hi, ys[j0].lo, ys[j1].hi)

    @property
    def has_diagonals(self) -> bool:
        return bool(
            (self.diagonal is not None and np.any(self.diagonal != 0))
            or (self.antidiagonal is not None and np.any(self.antidiagonal != 0))
        )


def refined_axes(mu: CompositeMeasure, nu: CompositeMeasure) -> Tuple[Axis, Axis]:
    """Merged axes of both measures, closed under every diagonal's maps."""
    return merged_axes((mu, nu), refine=True)


def check_grid_size(x_axis: Axis, y_axis: Axis, limit: Optional[int] = None) -> None:
    limit = limit or settings.max_rect_grid
    if len(x_axis) > limit or len(y_axis) > limit:
        raise GridTooLargeError(
            f"merged grid {len(x_axis)}x{len(y_axis)} exceeds {limit} slots per axis; "
            "use rect_distance_interval",
            {"x": len(x_axis), "y": len(y_axis), "limit": limit},
        )


def difference_grid(mu: CompositeMeasure, nu: CompositeMeasure, refine: bool) -> GridMeasure:
    x_axis, y_axis = merged_axes((mu, nu), refine=refine)
    check_grid_size(x_axis, y_axis)
    builder = CellTableBuilder(x_axis, y_axis, ((1, mu), (-1, nu)))
    table = builder.dense()
    return GridMeasure(
        x_axis,
        y_axis,
        table.total,
        builder.scale,
        table.uniform,
        table.diagonal,
        table.antidiagonal,
    )


def merged_difference_grid(mu: CompositeMeasure, nu: CompositeMeasure) -> GridMeasure:
    """
    mu(cell) - nu(cell) on the union of both breakpoint lists.

    Thin rows and columns appear at atom coordinates; summing any contiguous
    block gives the mass difference of the corresponding rectangle.
    """
    return difference_grid(mu, nu, refine=False)


def measure_grid(mu: CompositeMeasure, refine: bool = False) -> GridMeasure:
    """Unsigned cell masses of a single measure on its own breakpoints."""
    x_axis, y_axis = merged_axes((mu,), refine=refine)
    builder = CellTableBuilder(x_axis, y_axis, ((1, mu),))
    table = builder.dense()
    return GridMeasure(
        x_axis, y_axis, table.total, builder.scale, table.uniform, table.diagonal, table.antidiagonal
    )


@dataclass(frozen=True, eq=False)
class CoarseGrid:
    """An m x m cell-mass matrix plus the snapping guarantee."""

    grid: GridMeasure
    m: int
    bound: Fraction
    aligned: bool


def _cdf_matrix(mu: CompositeMeasure, points: Sequence[Fraction]) -> List[List[Fraction]]:
    # F(x_i, y_j) for i, j >= 1; index 0 stands for "just below 0" and is zero.
    m = len(points) - 1
    table = [[ZERO] * (m + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            table[i][j] = mu.cdf(points[i], points[j])
    return table


def coarsen(mu: CompositeMeasure, m: int) -> CoarseGrid:
    """
    Cell masses of mu on the uniform m x m grid.

    Cells are (x_{i-1}, x_i] x (y_{j-1}, y_j] with the first row and column
    closed at 0. Snapping any rectangle outward to this grid changes its mass by
    at most two column strips plus two row strips, which is the returned bound
    (4/m for permutons).
    """
    if m < 1:
        raise ValueError("coarsen needs m >= 1")
    points = [Fraction(k, m) for k in range(m + 1)]
    F = _cdf_matrix(mu, points)
    cells = [
        [F[i][j] - F[i - 1][j] - F[i][j - 1] + F[i - 1][j - 1] for j in range(1, m + 1)]
        for i in range(1, m + 1)
    ]
    scale = common_denominator(v for row in cells for v in row)
    dtype = np.int64 if scale < INT64_SAFE else object
    array = np.array([[int(v * scale) for v in row] for row in cells], dtype=dtype)
    axis = Axis(tuple(points))
    grid = GridMeasure(axis, axis, array, scale)
    column_max = max(sum(row, ZERO) for row in cells)
    row_max = max(sum((cells[i][j] for i in range(m)), ZERO) for j in range(m))
    aligned = (
        not mu.has_atoms
        and not mu.has_diagonals
        and all((v * m).denominator == 1 for v in mu.breakpoints_x + mu.breakpoints_y)
    )
    return CoarseGrid(grid=grid, m=m, bound=2 * (column_max + row_max), aligned=aligned)


def coarse_difference(a: CoarseGrid, b: CoarseGrid) -> GridMeasure:
    if a.m != b.m:
        raise ValueError("coarse grids must share m")
    scale = lcm(a.grid.scale, b.grid.scale)
    fa, fb = scale // a.grid.scale, scale // b.grid.scale
    dtype = np.int64 if scale < INT64_SAFE else object
    cells = a.grid.cells.astype(dtype) * fa - b.grid.cells.astype(dtype) * fb
    return GridMeasure(a.grid.x_axis, a.grid.y_axis, cells, scale)
