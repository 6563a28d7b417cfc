"""
Discrepancy Metrics
===================

PURPOSE:
Exact star discrepancy and rectangular distance between composite measures,
certified intervals for grids too large to sweep, and pattern densities.

CORE LOGIC:
1. Differences are tabulated on a refined merged grid (``permutons.grid``),
   integer-scaled so every comparison is exact.
2. Rectangles with all corners on grid lines are handled by a row-interval
   sweep with a prefix-extreme inner loop.
3. Inside a cell crossed by a diagonal the difference is no longer bilinear:
   an extreme corner may slide along the diagonal. Those candidates are
   quadratic in the slide parameters and are solved in closed form, first in
   float64 for screening and then exactly for the survivors.

Ties are broken by the smallest witness area, then by the lexicographically
smallest corners (a, b, c, d), so witnesses are deterministic.

EXAMPLE USAGE:
    result = rect_distance(builtin("figure1"), step_permuton(parse_permutation("12348765")))
    result.value        # Fraction(5, 32)
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.base_config import settings
from permutons.core import (
    ONE,
    ZERO,
    CompositeMeasure,
    Permutation,
    Rectangle,
    point_measure,
    rect_mass,
    require_permuton,
    step_permuton,
)
from permutons.exceptions import (
    EnumerationLimitError,
    InternalError,
    PatternSizeError,
)
from permutons.grid import (
    Axis,
    CellTableBuilder,
    GridMeasure,
    check_grid_size,
    coarse_difference,
    coarsen,
    difference_grid,
    merged_axes,
)

logger = logging.getLogger(__name__)

MAX_PATTERN_SIZE = 8
SCREEN_TOLERANCE = 1e-9


class DistanceMode(Enum):
    EXACT = "exact"
    INTERVAL = "interval"


@dataclass(frozen=True)
class DistanceResult:
    """
    A discrepancy value with its witness.

    For star discrepancy the witness is the anchored box [0,x] x [0,y].
    ``attained`` is False when the value is a one-sided limit (the closed
    witness rectangle itself gives a smaller difference).
    """

    value: Fraction
    witness: Rectangle
    mode: DistanceMode = DistanceMode.EXACT
    lower: Optional[Fraction] = None
    upper: Optional[Fraction] = None
    attained: bool = True
    sign: int = 1

    def __post_init__(self):
        if self.mode is DistanceMode.EXACT:
            object.__setattr__(self, "lower", self.value)
            object.__setattr__(self, "upper", self.value)
        elif self.lower is None or self.upper is None or self.lower > self.upper:
            raise InternalError("interval result needs lower <= upper")

    @property
    def corner(self) -> Tuple[Fraction, Fraction]:
        return self.witness.b, self.witness.d

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "value": _fmt(self.value),
            "witness": [_fmt(v) for v in self.witness.as_tuple()],
            "mode": self.mode.value,
            "attained": self.attained,
            "value_float": float(self.value),
        }
        if self.mode is DistanceMode.INTERVAL:
            data["lower"] = _fmt(self.lower)
            data["upper"] = _fmt(self.upper)
        return data


def _fmt(value: Fraction) -> str:
    return str(Fraction(value))


@dataclass(frozen=True)
class Pattern(Permutation):
    """A permutation used as a pattern, size at most 8."""

    def __post_init__(self):
        super().__post_init__()
        if self.n > MAX_PATTERN_SIZE:
            raise PatternSizeError(
                f"patterns have at most {MAX_PATTERN_SIZE} entries, got {self.n}",
                {"k": self.n},
            )


def as_pattern(sigma) -> Pattern:
    if isinstance(sigma, Pattern):
        return sigma
    values = sigma.values if isinstance(sigma, Permutation) else tuple(sigma)
    return Pattern(tuple(values))


# ============================================================================
# CANDIDATE BOOKKEEPING
# ============================================================================


def _key(rect: Rectangle) -> Tuple[Fraction, Fraction, Fraction, Fraction, Fraction]:
    return (rect.area, rect.a, rect.b, rect.c, rect.d)


@dataclass
class _Best:
    """Running maximum of |value| with the witness tie-break."""

    magnitude: Fraction = Fraction(-1)
    signed: Fraction = ZERO
    witness: Optional[Rectangle] = None

    def offer(self, signed: Fraction, rect: Rectangle) -> None:
        magnitude = abs(signed)
        if magnitude > self.magnitude or (
            magnitude == self.magnitude and _key(rect) < _key(self.witness)
        ):
            self.magnitude, self.signed, self.witness = magnitude, signed, rect


# ============================================================================
# GRID SWEEP
# ============================================================================


def _prefix_rows(cells: np.ndarray, top: int) -> np.ndarray:
    """P[b, j] = sum of cells[top..top+b, :j]; column 0 is zero."""
    column_sums = np.cumsum(cells[top:], axis=0)
    P = np.zeros((column_sums.shape[0], column_sums.shape[1] + 1), dtype=cells.dtype)
    P[:, 1:] = np.cumsum(column_sums, axis=1)
    return P


def _best_interval(prefix: np.ndarray, ys: Axis) -> Tuple[int, int, int]:
    """Shortest y-range reaching max(prefix) - min(prefix): (lo, hi, sign)."""
    top_value, low_value = prefix.max(), prefix.min()
    tagged = sorted(
        [(int(k), 1) for k in np.nonzero(prefix == top_value)[0]]
        + [(int(k), -1) for k in np.nonzero(prefix == low_value)[0]]
    )
    best = None
    for (k1, t1), (k2, t2) in zip(tagged, tagged[1:]):
        if t1 == t2 or k1 == k2:
            continue
        c, d = ys.slots[k1].lo, ys.slots[k2 - 1].hi
        key = (d - c, c, d)
        if best is None or key < best[0]:
            best = (key, k1, k2, 1 if t2 == 1 else -1)
    return best[1], best[2], best[3]


def grid_block_max(grid: GridMeasure) -> Tuple[Fraction, Rectangle]:
    """
    Maximum |block sum| over contiguous slot blocks, with its witness.

    O(Rx^2 * Ry): for every top row the column prefix sums of each bottom row
    are reduced to max - min of a 1-D prefix array.
    """
    cells = grid.cells
    Rx, Ry = cells.shape
    if Rx == 0 or Ry == 0 or not np.any(cells != 0):
        return ZERO, Rectangle(ZERO, ZERO, ZERO, ZERO)
    spans = []
    for top in range(Rx):
        P = _prefix_rows(cells, top)
        spans.append(P.max(axis=1) - P.min(axis=1))
    best_value = max(span.max() for span in spans)
    best = _Best()
    xs = grid.x_axis
    for top, span in enumerate(spans):
        bottoms = np.nonzero(span == best_value)[0]
        if len(bottoms) == 0:
            continue
        P = _prefix_rows(cells, top)
        for b in bottoms:
            lo, hi, sign = _best_interval(P[b], grid.y_axis)
            bottom = top + int(b)
            rect = Rectangle(
                xs.slots[top].lo, xs.slots[bottom].hi, grid.y_axis.slots[lo].lo, grid.y_axis.slots[hi - 1].hi
            )
            best.offer(Fraction(sign * int(best_value), grid.scale), rect)
    return best.signed, best.witness


def brute_force_grid_distance(grid: GridMeasure) -> Fraction:
    """Exhaustive O(G^4) block maximum; test oracle for small grids."""
    Rx, Ry = grid.shape
    P = np.zeros((Rx + 1, Ry + 1), dtype=grid.cells.dtype)
    P[1:, 1:] = np.cumsum(np.cumsum(grid.cells, axis=0), axis=1)
    best = 0
    for i0 in range(Rx):
        for i1 in range(i0, Rx):
            for j0 in range(Ry):
                for j1 in range(j0, Ry):
                    value = P[i1 + 1, j1 + 1] - P[i0, j1 + 1] - P[i1 + 1, j0] + P[i0, j0]
                    best = max(best, abs(int(value)))
    return Fraction(best, grid.scale)


# ============================================================================
# STATIONARY CANDIDATES ON DIAGONAL CELLS
# ============================================================================


@dataclass
class _Frame:
    """
    The difference tables seen through a reflection of the unit square.

    Reflecting x reverses the x-slots and swaps diagonals with antidiagonals;
    lower-left corners in the frame are lower-right corners of the original.
    """

    M: np.ndarray
    U: np.ndarray
    Dp: np.ndarray
    Dm: np.ndarray
    x_lo: List[Fraction]
    x_hi: List[Fraction]
    y_lo: List[Fraction]
    y_hi: List[Fraction]
    scale: int
    flip_x: bool = False
    flip_y: bool = False
    PS: np.ndarray = field(init=False)
    RowP: np.ndarray = field(init=False)
    ColP: np.ndarray = field(init=False)
    Mf: np.ndarray = field(init=False)
    Uf: np.ndarray = field(init=False)
    PSf: np.ndarray = field(init=False)
    RowPf: np.ndarray = field(init=False)
    ColPf: np.ndarray = field(init=False)

    def __post_init__(self):
        R, C = self.M.shape
        self.PS = np.zeros((R + 1, C + 1), dtype=self.M.dtype)
        self.PS[1:, 1:] = np.cumsum(np.cumsum(self.M, axis=0), axis=1)
        self.RowP = np.zeros((R, C + 1), dtype=self.M.dtype)
        self.RowP[:, 1:] = np.cumsum(self.M, axis=1)
        self.ColP = np.zeros((R + 1, C), dtype=self.M.dtype)
        self.ColP[1:, :] = np.cumsum(self.M, axis=0)
        to_float = lambda a: (a / self.scale).astype(np.float64)  # noqa: E731
        self.Mf = to_float(self.M)
        self.Uf = to_float(self.U)
        self.PSf = to_float(self.PS)
        self.RowPf = to_float(self.RowP)
        self.ColPf = to_float(self.ColP)

    @classmethod
    def build(cls, grid: GridMeasure, flip_x: bool, flip_y: bool) -> "_Frame":
        M, U, Dp, Dm = grid.cells, grid.uniform, grid.diagonal, grid.antidiagonal
        x_lo = [s.lo for s in grid.x_axis.slots]
        x_hi = [s.hi for s in grid.x_axis.slots]
        y_lo = [s.lo for s in grid.y_axis.slots]
        y_hi = [s.hi for s in grid.y_axis.slots]
        if flip_x:
            M, U, Dp, Dm = M[::-1, :], U[::-1, :], Dm[::-1, :], Dp[::-1, :]
            x_lo, x_hi = [ONE - v for v in x_hi[::-1]], [ONE - v for v in x_lo[::-1]]
        if flip_y:
            M, U, Dp, Dm = M[:, ::-1], U[:, ::-1], Dm[:, ::-1], Dp[:, ::-1]
            y_lo, y_hi = [ONE - v for v in y_hi[::-1]], [ONE - v for v in y_lo[::-1]]
        return cls(
            np.ascontiguousarray(M),
            np.ascontiguousarray(U),
            np.ascontiguousarray(Dp),
            np.ascontiguousarray(Dm),
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            grid.scale,
            flip_x,
            flip_y,
        )

    def rectangle(self, a: Fraction, b: Fraction, c: Fraction, d: Fraction) -> Rectangle:
        if self.flip_x:
            a, b = ONE - b, ONE - a
        if self.flip_y:
            c, d = ONE - d, ONE - c
        return Rectangle(a, b, c, d)

    def diagonal_cells(self) -> List[Tuple[int, int, int]]:
        plus = np.argwhere(self.Dp != 0)
        minus = np.argwhere(self.Dm != 0)
        cells = [(int(i), int(j), 1) for i, j in plus] + [(int(i), int(j), -1) for i, j in minus]
        return sorted(cells)

    def block(self, i0: int, i1: int, j0: int, j1: int) -> int:
        if i0 > i1 or j0 > j1:
            return 0
        P = self.PS
        return int(P[i1 + 1, j1 + 1]) - int(P[i0, j1 + 1]) - int(P[i1 + 1, j0]) + int(P[i0, j0])

    def point(self, i: int, j: int, tx: Fraction, ty: Fraction) -> Tuple[Fraction, Fraction]:
        return (
            self.x_lo[i] + tx * (self.x_hi[i] - self.x_lo[i]),
            self.y_lo[j] + ty * (self.y_hi[j] - self.y_lo[j]),
        )


def _quadratic_peak(constant: int, linear: int, quadratic: int) -> Optional[Tuple[Fraction, Fraction]]:
    """Stationary point u* in (0,1) of c + l*u + q*u^2 and its value."""
    if quadratic == 0:
        return None
    u = Fraction(-linear, 2 * quadratic)
    if not ZERO < u < ONE:
        return None
    return u, constant + linear * u + quadratic * u * u


def _one_corner_exact(frame: _Frame, i: int, j: int, sign: int, I: int, J: int):
    """Lower-left corner sliding on the diagonal of cell (i, j), upper-right at slot ends (I, J)."""
    K = frame.block(i + 1, I, j + 1, J)
    CP = frame.block(i, i, j + 1, J)
    RP = frame.block(i + 1, I, j, j)
    U = int(frame.U[i, j])
    if sign == 1:
        D = int(frame.Dp[i, j])
        peak = _quadratic_peak(K, CP + RP + D, U)
        if peak is None:
            return None
        u, value = peak
        t = ONE - u
        x, y = frame.point(i, j, t, t)
    else:
        peak = _quadratic_peak(K + CP, RP - CP + U, -U)
        if peak is None:
            return None
        t, value = peak
        x, y = frame.point(i, j, t, ONE - t)
    return value, frame.rectangle(x, frame.x_hi[I], y, frame.y_hi[J])


def _one_corner_screen(frame: _Frame, i: int, j: int, sign: int):
    """Float values of all one-corner candidates for the diagonal cell (i, j)."""
    PSf = frame.PSf
    K = PSf[i + 1 :, j + 1 :] - PSf[i + 1, j + 1 :][None, :] - PSf[i + 1 :, j + 1][:, None] + PSf[i + 1, j + 1]
    CP = frame.RowPf[i, j + 1 :] - frame.RowPf[i, j + 1]
    RP = frame.ColPf[i + 1 :, j] - frame.ColPf[i + 1, j]
    U = frame.Uf[i, j]
    if U == 0:
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        if sign == 1:
            D = float(frame.Dp[i, j] / frame.scale)
            B = CP[None, :] + RP[:, None] + D
            u = -B / (2 * U)
            values = K - B * B / (4 * U)
        else:
            B = RP[:, None] - CP[None, :] + U
            u = B / (2 * U)
            values = K + CP[None, :] + B * B / (4 * U)
    values = np.where((u > 0) & (u < 1), np.abs(values), -1.0)
    return values


def _two_corner_coefficients(frame: _Frame, i: int, j: int, sign: int, I, J, signs, exact: bool):
    """
    Quadratic coefficients for a lower-left corner on the diagonal of (i, j)
    and an upper-right corner on the diagonal of (I, J), I > i and J > j.
    """
    if exact:
        PS, RowP, ColP, U = frame.PS, frame.RowP, frame.ColP, frame.U
        conv = int
        Dp_ij, Dp_IJ = int(frame.Dp[i, j]), int(frame.Dp[I, J])
    else:
        PS, RowP, ColP, U = frame.PSf, frame.RowPf, frame.ColPf, frame.Uf
        conv = lambda v: v  # noqa: E731
        Dp_ij = float(frame.Dp[i, j] / frame.scale)
        Dp_IJ = (frame.Dp[I, J] / frame.scale).astype(np.float64)
    p0, p1 = (0, 1) if sign == 1 else (1, -1)
    q0 = np.where(signs == 1, 0, 1) if not exact else (0 if signs == 1 else 1)
    q1 = np.where(signs == 1, 1, -1) if not exact else (1 if signs == 1 else -1)
    K = conv(PS[I, J]) - conv(PS[i + 1, J]) - conv(PS[I, j + 1]) + conv(PS[i + 1, j + 1])
    CPi = conv(RowP[i, J]) - conv(RowP[i, j + 1])
    RPj = conv(ColP[I, j]) - conv(ColP[i + 1, j])
    CPI = conv(RowP[I, J]) - conv(RowP[I, j + 1])
    RPJ = conv(ColP[I, J]) - conv(ColP[i + 1, J])
    U_ij, U_IJ, U_iJ, U_Ij = conv(U[i, j]), conv(U[I, J]), conv(U[i, J]), conv(U[I, j])
    C0 = K + CPi + (1 - p0) * RPj + q0 * RPJ + U_ij * (1 - p0) + Dp_ij + U_iJ * q0
    Bt = -CPi - p1 * RPj - U_ij * (1 - p0 + p1) - Dp_ij - U_iJ * q0
    Bs = CPI + q1 * RPJ + U_IJ * q0 + Dp_IJ + U_iJ * q1 + U_Ij * (1 - p0)
    Att = U_ij * p1
    Ass = U_IJ * q1
    Ats = -U_iJ * q1 - U_Ij * p1
    return C0, Bt, Bs, Att, Ass, Ats


def _two_corner_exact(frame: _Frame, i: int, j: int, sign: int, I: int, J: int, sign_IJ: int):
    C0, Bt, Bs, Att, Ass, Ats = _two_corner_coefficients(frame, i, j, sign, I, J, sign_IJ, exact=True)
    delta = 4 * Att * Ass - Ats * Ats
    if delta == 0:
        return None
    t = Fraction(Ats * Bs - 2 * Ass * Bt, delta)
    s = Fraction(Ats * Bt - 2 * Att * Bs, delta)
    if not (ZERO < t < ONE and ZERO < s < ONE):
        return None
    value = C0 + (Bt * t + Bs * s) / 2
    p0, p1 = (0, 1) if sign == 1 else (1, -1)
    q0, q1 = (0, 1) if sign_IJ == 1 else (1, -1)
    x0, y0 = frame.point(i, j, t, p0 + p1 * t)
    x1, y1 = frame.point(I, J, s, q0 + q1 * s)
    return value, frame.rectangle(x0, x1, y0, y1)


def _two_corner_screen(frame: _Frame, i: int, j: int, sign: int, cells: np.ndarray):
    """Float values for all (I, J) diagonal cells above-right of (i, j); -1 where invalid."""
    I, J, signs = cells[:, 0], cells[:, 1], cells[:, 2]
    C0, Bt, Bs, Att, Ass, Ats = _two_corner_coefficients(frame, i, j, sign, I, J, signs, exact=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = 4 * Att * Ass - Ats * Ats
        t = (Ats * Bs - 2 * Ass * Bt) / delta
        s = (Ats * Bt - 2 * Att * Bs) / delta
        values = C0 + (Bt * t + Bs * s) / 2
    ok = (delta != 0) & (t > 0) & (t < 1) & (s > 0) & (s < 1)
    return np.where(ok, np.abs(values), -1.0)


def _same_cell_exact(frame: _Frame, i: int, j: int, sign: int):
    U = int(frame.U[i, j])
    D = int(frame.Dp[i, j]) if sign == 1 else int(frame.Dm[i, j])
    peak = _quadratic_peak(0, D, U)
    if peak is None:
        return None
    delta, value = peak
    if sign == 1:
        x0, y0 = frame.point(i, j, ZERO, ZERO)
        x1, y1 = frame.point(i, j, delta, delta)
    else:
        x0, y0 = frame.point(i, j, ZERO, ONE - delta)
        x1, y1 = frame.point(i, j, delta, ONE)
    return value, frame.rectangle(x0, x1, y0, y1)


def diagonals_are_sparse(grid: GridMeasure) -> bool:
    """At most one diagonal cell in every refined column and row."""
    present = (grid.diagonal != 0) | (grid.antidiagonal != 0)
    return bool(present.sum(axis=0).max(initial=0) <= 1 and present.sum(axis=1).max(initial=0) <= 1)


def _stationary_candidates(grid: GridMeasure, floor: float) -> List[Tuple[int, Rectangle]]:
    """
    Exact values and witnesses of every sliding-corner candidate whose float
    screen value comes within tolerance of the best value seen.
    """
    frames = {
        (fx, fy): _Frame.build(grid, fx, fy) for fx in (False, True) for fy in (False, True)
    }
    screened: List[Tuple[float, tuple]] = []
    best_float = floor
    for (fx, fy), frame in frames.items():
        cells = frame.diagonal_cells()
        cell_array = np.array(cells, dtype=np.int64).reshape(-1, 3)
        for i, j, sign in cells:
            values = _one_corner_screen(frame, i, j, sign)
            if values is not None and values.size:
                top = float(values.max())
                if top >= best_float - SCREEN_TOLERANCE:
                    best_float = max(best_float, top)
                    for a, b in np.argwhere(values >= best_float - SCREEN_TOLERANCE):
                        screened.append((float(values[a, b]), ("one", fx, fy, i, j, sign, i + int(a), j + int(b))))
            if fy:
                continue
            if not fx:
                screened.append((0.0, ("same", fx, fy, i, j, sign)))
            above = cell_array[(cell_array[:, 0] > i) & (cell_array[:, 1] > j)]
            if len(above):
                values = _two_corner_screen(frame, i, j, sign, above)
                top = float(values.max())
                if top >= best_float - SCREEN_TOLERANCE:
                    best_float = max(best_float, top)
                    for k in np.nonzero(values >= best_float - SCREEN_TOLERANCE)[0]:
                        I, J, s = (int(v) for v in above[k])
                        screened.append((float(values[k]), ("two", fx, fy, i, j, sign, I, J, s)))
    results = []
    for value, spec in screened:
        if spec[0] != "same" and value < best_float - SCREEN_TOLERANCE:
            continue
        frame = frames[(spec[1], spec[2])]
        if spec[0] == "one":
            found = _one_corner_exact(frame, *spec[3:])
        elif spec[0] == "two":
            found = _two_corner_exact(frame, *spec[3:])
        else:
            found = _same_cell_exact(frame, *spec[3:])
        if found is not None:
            results.append(found)
    logger.debug("stationary candidates: %d screened, %d exact", len(screened), len(results))
    return results


# ============================================================================
# PUBLIC DISTANCES
# ============================================================================


def _attained(mu: CompositeMeasure, nu: CompositeMeasure, rect: Rectangle, signed: Fraction) -> bool:
    return rect_mass(mu, rect) - rect_mass(nu, rect) == signed


def grid_distance(grid: GridMeasure) -> Tuple[Fraction, Rectangle]:
    """
    Signed extreme difference on a refined grid and its witness.

    The grid must satisfy ``diagonals_are_sparse``.
    """
    signed, witness = grid_block_max(grid)
    if not grid.has_diagonals:
        return signed, witness
    best = _Best()
    best.offer(signed * grid.scale, witness)
    for value, rect in _stationary_candidates(grid, float(abs(signed))):
        best.offer(value, rect)
    return Fraction(best.signed) / grid.scale, best.witness


def grid_block_distance(mu: CompositeMeasure, nu: CompositeMeasure) -> DistanceResult:
    """
    Maximum |mu(R) - nu(R)| over rectangles whose corners lie on the merged
    (unrefined) breakpoint grid. A lower bound for ``rect_distance``, equal to
    it when neither measure has diagonal segments.
    """
    grid = difference_grid(mu, nu, refine=False)
    signed, witness = grid_block_max(grid)
    return DistanceResult(
        value=abs(signed),
        witness=witness,
        attained=_attained(mu, nu, witness, signed),
        sign=1 if signed >= 0 else -1,
    )


def rect_distance(mu: CompositeMeasure, nu: CompositeMeasure) -> DistanceResult:
    """
    Exact sup over closed rectangles of |mu(R) - nu(R)|.

    Falls back to ``rect_distance_interval`` (mode="interval") when two
    diagonal cells share a refined column or row.
    """
    grid = difference_grid(mu, nu, refine=True)
    logger.debug("rect_distance grid %dx%d scale %d", *grid.shape, grid.scale)
    if grid.has_diagonals and not diagonals_are_sparse(grid):
        m = max(8, min(settings.max_rect_grid, 2 * max(grid.shape)))
        logger.warning("overlapping diagonal cells; falling back to interval mode with m=%d", m)
        return rect_distance_interval(mu, nu, m)
    value, witness = grid_distance(grid)
    return DistanceResult(
        value=abs(value),
        witness=witness,
        attained=_attained(mu, nu, witness, value),
        sign=1 if value >= 0 else -1,
    )


def rect_distance_interval(mu: CompositeMeasure, nu: CompositeMeasure, m: int) -> DistanceResult:
    """
    Certified interval for the rectangular distance from m x m coarsenings.

    lower is the best block of the coarse difference (a genuine rectangle
    difference); upper widens it by both snapping bounds.
    """
    if m < 2:
        raise ValueError("rect_distance_interval needs m >= 2")
    coarse_mu, coarse_nu = coarsen(mu, m), coarsen(nu, m)
    signed, witness = grid_block_max(coarse_difference(coarse_mu, coarse_nu))
    lower = abs(signed)
    if coarse_mu.aligned and coarse_nu.aligned:
        upper = lower
    else:
        upper = min(ONE, lower + coarse_mu.bound + coarse_nu.bound)
    logger.debug("interval mode m=%d: [%s, %s]", m, lower, upper)
    return DistanceResult(
        value=lower,
        witness=witness,
        mode=DistanceMode.INTERVAL,
        lower=lower,
        upper=upper,
        attained=_attained(mu, nu, witness, signed),
        sign=1 if signed >= 0 else -1,
    )


def star_discrepancy(mu: CompositeMeasure, nu: CompositeMeasure) -> DistanceResult:
    """
    Exact sup over anchored boxes [0,x] x [0,y] of |F_mu - F_nu|.

    Rows of the difference table are streamed, so grids far beyond the
    rectangle-sweep limit are fine. Candidates are all slot corners (one-sided
    limits included) plus stationary points on diagonal cells.
    """
    x_axis, y_axis = merged_axes((mu, nu), refine=True)
    builder = CellTableBuilder(x_axis, y_axis, ((1, mu), (-1, nu)))
    scale = builder.scale
    y_lo = [s.lo for s in y_axis.slots]
    y_hi = [s.hi for s in y_axis.slots]
    best_value = Fraction(0)
    best_corner = (ZERO, ZERO)
    column_sums = np.zeros(len(y_axis), dtype=builder.dtype)

    def offer(value: Fraction, x: Fraction, y: Fraction) -> None:
        nonlocal best_value, best_corner
        magnitude = abs(value)
        if magnitude > abs(best_value) or (magnitude == abs(best_value) and (x, y) < best_corner):
            best_value, best_corner = value, (x, y)

    for s, row, diagonal_cells in builder.iter_rows():
        slot = x_axis.slots[s]
        before = np.zeros(len(y_axis) + 1, dtype=builder.dtype)
        before[1:] = np.cumsum(column_sums)
        row_prefix = np.zeros(len(y_axis) + 1, dtype=builder.dtype)
        row_prefix[1:] = np.cumsum(row)
        for r, D, sign, U in diagonal_cells:
            Q, A, B, U = int(before[r]), int(row_prefix[r]), int(column_sums[r]), int(U)
            if sign == 1:
                peak = _quadratic_peak(Q, A + B + D, U)
                if peak is not None:
                    t, value = peak
                    offer(value / scale, slot.lo + t * slot.length, y_lo[r] + t * (y_hi[r] - y_lo[r]))
            else:
                peak = _quadratic_peak(Q + B, A - B + U, -U)
                if peak is not None:
                    t, value = peak
                    offer(value / scale, slot.lo + t * slot.length, y_hi[r] - t * (y_hi[r] - y_lo[r]))
        column_sums = column_sums + row
        corners = np.cumsum(column_sums)
        magnitudes = np.abs(corners)
        top = magnitudes.max()
        if Fraction(int(top), scale) >= abs(best_value) and top > 0:
            r = int(np.argmax(magnitudes == top))
            offer(Fraction(int(corners[r]), scale), slot.hi, y_hi[r])
    x, y = best_corner
    witness = Rectangle(ZERO, x, ZERO, y)
    attained = mu.cdf(x, y) - nu.cdf(x, y) == best_value
    return DistanceResult(
        value=abs(best_value),
        witness=witness,
        attained=attained,
        sign=1 if best_value >= 0 else -1,
    )


def step_point_sandwich(pi: Permutation) -> Tuple[Fraction, Fraction, Fraction]:
    """(1/n, d(step, points), 4/n); the middle value always lies in between."""
    n = pi.n
    value = rect_distance(step_permuton(pi), point_measure(pi)).value
    return Fraction(1, n), value, Fraction(4, n)


def star_rect_sandwich(mu: CompositeMeasure, nu: CompositeMeasure) -> Tuple[Fraction, Fraction]:
    """(star, rect), checked against star <= rect <= 4 star."""
    star = star_discrepancy(mu, nu).value
    rect = rect_distance(mu, nu).value
    if not star <= rect <= 4 * star:
        raise InternalError("star/rect sandwich violated", {"star": str(star), "rect": str(rect)})
    return star, rect


# ============================================================================
# PATTERN DENSITIES
# ============================================================================


def _count_pairs(values: np.ndarray, increasing: bool) -> int:
    n = len(values)
    total = 0
    for j in range(1, n):
        smaller = int(np.count_nonzero(values[:j] < values[j]))
        total += smaller if increasing else j - smaller
    return total


def _count_triples(sigma: Tuple[int, ...], values: np.ndarray) -> int:
    """Occurrences of a length-3 pattern in O(n^2) using a 2-D dominance table."""
    n = len(values)
    p = values - 1
    occupied = np.zeros((n, n), dtype=np.int64)
    occupied[np.arange(n), p] = 1
    below = np.zeros((n + 1, n + 1), dtype=np.int64)
    below[1:, 1:] = np.cumsum(np.cumsum(occupied, axis=0), axis=1)
    r1, r2, r3 = sigma
    total = 0
    for j in range(1, n - 1):
        tail = p[j + 1 :]
        mask = tail > p[j] if r2 < r3 else tail < p[j]
        partners = tail[mask]
        if partners.size == 0:
            continue
        lo = np.minimum(partners, p[j])
        hi = np.maximum(partners, p[j])
        row = below[j]
        if r1 == 1:
            counts = row[lo]
        elif r1 == 3:
            counts = j - row[hi + 1]
        else:
            counts = row[hi] - row[lo + 1]
        total += int(counts.sum())
    return total


def pattern_density_perm(sigma, pi: Permutation) -> Fraction:
    """
    t(sigma, pi): fraction of k-subsets of positions whose values are order
    isomorphic to sigma.
    """
    sigma = as_pattern(sigma)
    k, n = sigma.n, pi.n
    if k > n:
        raise PatternSizeError(f"pattern of size {k} does not fit in a permutation of size {n}", {"k": k, "n": n})
    total = comb(n, k)
    if k == 1:
        return ONE
    values = np.array(pi.values, dtype=np.int64)
    if k == 2:
        return Fraction(_count_pairs(values, sigma.values == (1, 2)), total)
    if k == 3:
        return Fraction(_count_triples(sigma.values, values), total)
    if total > settings.exhaustive_limit:
        raise EnumerationLimitError(
            f"C({n},{k}) = {total} exceeds the enumeration limit {settings.exhaustive_limit}",
            {"n": n, "k": k, "limit": settings.exhaustive_limit},
        )
    target = tuple(v - 1 for v in sigma.values)
    count = 0
    for subset in combinations(pi.values, k):
        order = sorted(range(k), key=subset.__getitem__)
        ranks = [0] * k
        for rank, idx in enumerate(order):
            ranks[idx] = rank
        if tuple(ranks) == target:
            count += 1
    return Fraction(count, total)


@dataclass(frozen=True)
class DensityEstimate:
    mean: float
    stderr: float
    samples: int
    hits: int

    def within(self, target: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - target) <= sigmas * max(self.stderr, 1e-12)

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean, "stderr": self.stderr, "samples": self.samples, "hits": self.hits}


def pattern_density_measure(
    sigma, mu: CompositeMeasure, samples: int, seed: int, threads: Optional[int] = None
) -> DensityEstimate:
    """
    Monte Carlo estimate of t(sigma, mu) with standard error sqrt(p(1-p)/N).

    Samples are drawn in fixed-size chunks, each with its own spawned seed, so
    the estimate does not depend on the number of threads.
    """
    from permutons.lowdisc import read_patterns, sample_points
    from permutons.parallel import parallel_map
    from permutons.rng import spawn_generators

    sigma = as_pattern(sigma)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    require_permuton(mu)
    k = sigma.n
    if k == 1:
        return DensityEstimate(mean=1.0, stderr=0.0, samples=samples, hits=samples)
    chunk = settings.mc_chunk_size
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    generators = spawn_generators(seed, len(sizes))
    target = np.array(sigma.values, dtype=np.int64) - 1

    def run_chunk(job):
        size, rng = job
        xs, ys = sample_points(mu, size * k, rng)
        ranks = read_patterns(xs.reshape(size, k), ys.reshape(size, k))
        return int(np.count_nonzero(np.all(ranks == target, axis=1)))

    hits = sum(parallel_map(run_chunk, list(zip(sizes, generators)), threads))
    mean = hits / samples
    stderr = float(np.sqrt(mean * (1 - mean) / samples))
    logger.info("t(%s) estimate %.6f +- %.6f over %d samples", sigma, mean, stderr, samples)
    return DensityEstimate(mean=mean, stderr=stderr, samples=samples, hits=hits)
