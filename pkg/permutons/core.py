"""
Permuton Core Representations
=============================

PURPOSE:
Exact representations of permutations, rectangles and permutons.

A permuton is stored as a CompositeMeasure: a finite list of mass-carrying
primitives (uniform rectangles, 45 degree diagonal segments and atoms). Every
quantity computed from it (CDF values, rectangle masses, marginals) is an exact
Fraction.

CONVENTIONS:
- Rectangles are closed, degenerate rectangles (zero width or height) allowed.
- An Atom lying on the boundary of a rectangle counts fully.
- A DiagonalSegment with sign +1 runs (a,c) -> (b,d); sign -1 runs (a,d) -> (b,c).
  Its mass is spread uniformly along the x-projection.

EXAMPLE USAGE:
    mu = builtin("figure1")
    cdf(mu, Fraction(3, 4), Fraction(3, 4))          # Fraction(5, 8)
    pi_hat = step_permuton(make_permutation([2, 1]))
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import accumulate
from math import lcm
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from permutons.exceptions import (
    ExchangeSpecError,
    InvalidMeasureError,
    InvalidPermutationError,
    InvalidRectangleError,
)

logger = logging.getLogger(__name__)

Rational = Fraction
RationalLike = Union[Fraction, int, str]

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)


def to_rational(value: Any) -> Fraction:
    """
    Convert ints, Fractions and decimal or "p/q" strings to an exact Fraction.

    Floats are accepted through their shortest decimal repr, so 0.2 becomes 1/5
    rather than the binary expansion of the float.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational number: {value!r}") from exc
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


# ============================================================================
# PERMUTATIONS
# ============================================================================


@dataclass(frozen=True)
class Permutation:
    """
    A permutation of {1..n} in one-line notation.

    ``values[i - 1]`` is pi(i). Instances are validated on construction and
    immutable afterwards.
    """

    values: Tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        n = len(values)
        if n == 0:
            raise InvalidPermutationError("a permutation needs at least one value")
        seen = set()
        for v in values:
            if v < 1 or v > n:
                raise InvalidPermutationError(
                    f"value {v} is outside 1..{n}", {"value": v, "n": n}
                )
            if v in seen:
                missing = sorted(set(range(1, n + 1)) - set(values))
                raise InvalidPermutationError(
                    f"value {v} is duplicated (missing: {missing})",
                    {"duplicated": v, "missing": missing},
                )
            seen.add(v)

    @property
    def n(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[int]:
        return iter(self.values)

    def __call__(self, i: int) -> int:
        """pi(i) with 1-based i."""
        return self.values[i - 1]

    def __str__(self) -> str:
        if self.n <= 9:
            return "".join(str(v) for v in self.values)
        return " ".join(str(v) for v in self.values)

    def __lt__(self, other: "Permutation") -> bool:
        return self.values < other.values

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, v in enumerate(self.values, start=1):
            inv[v - 1] = i
        return Permutation(tuple(inv))

    def reverse(self) -> "Permutation":
        return Permutation(self.values[::-1])

    def complement(self) -> "Permutation":
        return Permutation(tuple(self.n + 1 - v for v in self.values))

    def pattern_of(self, indices: Sequence[int]) -> "Permutation":
        """Pattern induced by the 1-based positions ``indices``."""
        picked = [self.values[i - 1] for i in indices]
        order = sorted(range(len(picked)), key=lambda k: picked[k])
        ranks = [0] * len(picked)
        for rank, k in enumerate(order, start=1):
            ranks[k] = rank
        return Permutation(tuple(ranks))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))


def make_permutation(values: Iterable[int]) -> Permutation:
    values = tuple(values)
    if not values:
        raise InvalidPermutationError("a permutation needs at least one value")
    return Permutation(values)


def parse_permutation(text: str) -> Permutation:
    """
    Parse one-line notation.

    Accepts "15342" (single digits, n <= 9), "1,5,3,4,2" and "1 5 3 4 2".
    """
    stripped = text.strip()
    if not stripped:
        raise InvalidPermutationError("empty permutation text")
    if "," in stripped or " " in stripped:
        parts = [p for p in stripped.replace(",", " ").split() if p]
    else:
        parts = list(stripped)
    try:
        values = [int(p) for p in parts]
    except ValueError as exc:
        raise InvalidPermutationError(f"not a permutation: {text!r}") from exc
    return make_permutation(values)


# ============================================================================
# RECTANGLES
# ============================================================================


@dataclass(frozen=True, order=True)
class Rectangle:
    """Closed box [a,b] x [c,d] inside the unit square."""

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, to_rational(getattr(self, name)))
        if not (ZERO <= self.a <= self.b <= ONE and ZERO <= self.c <= self.d <= ONE):
            raise InvalidRectangleError(
                f"invalid rectangle [{self.a},{self.b}]x[{self.c},{self.d}]"
            )

    @classmethod
    def unit(cls) -> "Rectangle":
        return cls(ZERO, ONE, ZERO, ONE)

    @property
    def width(self) -> Fraction:
        return self.b - self.a

    @property
    def height(self) -> Fraction:
        return self.d - self.c

    @property
    def area(self) -> Fraction:
        return self.width * self.height

    @property
    def is_degenerate(self) -> bool:
        return self.a == self.b or self.c == self.d

    def as_tuple(self) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.a, self.b, self.c, self.d)

    def contains(self, x: Fraction, y: Fraction) -> bool:
        return self.a <= x <= self.b and self.c <= y <= self.d

    def __str__(self) -> str:
        return f"[{self.a},{self.b}]x[{self.c},{self.d}]"


def _overlap(lo1: Fraction, hi1: Fraction, lo2: Fraction, hi2: Fraction) -> Fraction:
    return max(ZERO, min(hi1, hi2) - max(lo1, lo2))


# ============================================================================
# PRIMITIVES
# ============================================================================


class PrimitiveKind(Enum):
    UNIFORM_RECT = "uniform_rect"
    DIAGONAL_SEGMENT = "diagonal_segment"
    ATOM = "atom"


@dataclass(frozen=True)
class Primitive:
    """
    One mass-carrying piece of a composite measure.

    CORE LOGIC:
    - UNIFORM_RECT: mass spread uniformly over a non-degenerate region.
    - DIAGONAL_SEGMENT: square region, mass uniform along the x-projection of
      the main (+1) or anti (-1) diagonal.
    - ATOM: degenerate region (a single point) carrying all its mass there.
    """

    kind: PrimitiveKind
    region: Rectangle
    mass: Fraction
    sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mass", to_rational(self.mass))
        if not (ZERO < self.mass <= ONE):
            raise InvalidMeasureError(f"primitive mass {self.mass} outside (0,1]")
        r = self.region
        if self.kind is PrimitiveKind.UNIFORM_RECT:
            if r.is_degenerate:
                raise InvalidMeasureError(f"uniform rectangle {r} is degenerate")
        elif self.kind is PrimitiveKind.DIAGONAL_SEGMENT:
            if r.width != r.height or r.width == 0:
                raise InvalidMeasureError(f"diagonal segment region {r} is not a square")
            if self.sign not in (1, -1):
                raise InvalidMeasureError(f"diagonal sign must be +1 or -1, got {self.sign}")
        elif self.kind is PrimitiveKind.ATOM:
            if r.a != r.b or r.c != r.d:
                raise InvalidMeasureError(f"atom region {r} is not a point")

    @classmethod
    def uniform(cls, a, b, c, d, mass) -> "Primitive":
        return cls(PrimitiveKind.UNIFORM_RECT, Rectangle(a, b, c, d), to_rational(mass))

    @classmethod
    def diagonal(cls, a, b, c, d, mass, sign: int = 1) -> "Primitive":
        return cls(PrimitiveKind.DIAGONAL_SEGMENT, Rectangle(a, b, c, d), to_rational(mass), sign)

    @classmethod
    def atom(cls, x, y, mass) -> "Primitive":
        return cls(PrimitiveKind.ATOM, Rectangle(x, x, y, y), to_rational(mass))

    def y_at(self, x: Fraction) -> Fraction:
        """Height of a diagonal segment above x (x inside the x-projection)."""
        r = self.region
        if self.sign == 1:
            return r.c + (x - r.a)
        return r.d - (x - r.a)

    def x_at(self, y: Fraction) -> Fraction:
        r = self.region
        if self.sign == 1:
            return r.a + (y - r.c)
        return r.a + (r.d - y)

    def mass_in(self, rect: Rectangle) -> Fraction:
        """Exact mass inside the closed rectangle."""
        r = self.region
        if self.kind is PrimitiveKind.ATOM:
            return self.mass if rect.contains(r.a, r.c) else ZERO
        if self.kind is PrimitiveKind.UNIFORM_RECT:
            ox = _overlap(r.a, r.b, rect.a, rect.b)
            if ox == 0:
                return ZERO
            oy = _overlap(r.c, r.d, rect.c, rect.d)
            return self.mass * ox * oy / (r.width * r.height)
        w = r.width
        if self.sign == 1:
            lo = max(ZERO, (rect.a - r.a) / w, (rect.c - r.c) / w)
            hi = min(ONE, (rect.b - r.a) / w, (rect.d - r.c) / w)
        else:
            lo = max(ZERO, (rect.a - r.a) / w, (r.d - rect.d) / w)
            hi = min(ONE, (rect.b - r.a) / w, (r.d - rect.c) / w)
        if hi <= lo:
            return ZERO
        return self.mass * (hi - lo)

    def clipped(self, rect: Rectangle) -> Optional["Primitive"]:
        """The part of this primitive inside ``rect``, or None when it carries no mass there."""
        mass = self.mass_in(rect)
        if mass == 0:
            return None
        r = self.region
        if self.kind is PrimitiveKind.ATOM:
            return self
        if self.kind is PrimitiveKind.UNIFORM_RECT:
            region = Rectangle(max(r.a, rect.a), min(r.b, rect.b), max(r.c, rect.c), min(r.d, rect.d))
            return Primitive(self.kind, region, mass)
        w = r.width
        if self.sign == 1:
            lo = max(ZERO, (rect.a - r.a) / w, (rect.c - r.c) / w)
            hi = min(ONE, (rect.b - r.a) / w, (rect.d - r.c) / w)
            region = Rectangle(r.a + lo * w, r.a + hi * w, r.c + lo * w, r.c + hi * w)
        else:
            lo = max(ZERO, (rect.a - r.a) / w, (r.d - rect.d) / w)
            hi = min(ONE, (rect.b - r.a) / w, (r.d - rect.c) / w)
            region = Rectangle(r.a + lo * w, r.a + hi * w, r.d - hi * w, r.d - lo * w)
        return Primitive(self.kind, region, mass, self.sign)

    def transformed(self, symmetry: str) -> "Primitive":
        r = self.region
        if symmetry == "reverse":
            region = Rectangle(ONE - r.b, ONE - r.a, r.c, r.d)
            sign = -self.sign
        elif symmetry == "complement":
            region = Rectangle(r.a, r.b, ONE - r.d, ONE - r.c)
            sign = -self.sign
        elif symmetry == "inverse":
            region = Rectangle(r.c, r.d, r.a, r.b)
            sign = self.sign
        else:
            raise ValueError(f"unknown symmetry {symmetry!r}")
        if self.kind is not PrimitiveKind.DIAGONAL_SEGMENT:
            sign = 1
        return Primitive(self.kind, region, self.mass, sign)

    def scaled(self, x0: Fraction, y0: Fraction, scale: Fraction, weight: Fraction) -> "Primitive":
        """Image under (x, y) -> (x0 + scale*x, y0 + scale*y) with mass multiplied by weight."""
        r = self.region
        region = Rectangle(
            x0 + scale * r.a, x0 + scale * r.b, y0 + scale * r.c, y0 + scale * r.d
        )
        return Primitive(self.kind, region, self.mass * weight, self.sign)


# ============================================================================
# COMPOSITE MEASURES
# ============================================================================


@dataclass(frozen=True, eq=False)
class CompositeMeasure:
    """
    A probability measure on the unit square built from primitives.

    The CDF is piecewise bilinear between the breakpoints, except along
    diagonal segments where it is piecewise quadratic, and it jumps at atoms.
    """

    primitives: Tuple[Primitive, ...]
    name: str = "custom"

    def __post_init__(self):
        prims = tuple(self.primitives)
        object.__setattr__(self, "primitives", prims)
        if not prims:
            raise InvalidMeasureError("a measure needs at least one primitive")
        total = sum((p.mass for p in prims), ZERO)
        if total != ONE:
            raise InvalidMeasureError(f"total mass is {total}, expected 1")

    @cached_property
    def breakpoints_x(self) -> Tuple[Fraction, ...]:
        points = {ZERO, ONE}
        for p in self.primitives:
            points.update((p.region.a, p.region.b))
        return tuple(sorted(points))

    @cached_property
    def breakpoints_y(self) -> Tuple[Fraction, ...]:
        points = {ZERO, ONE}
        for p in self.primitives:
            points.update((p.region.c, p.region.d))
        return tuple(sorted(points))

    @cached_property
    def atoms(self) -> Tuple[Primitive, ...]:
        return tuple(p for p in self.primitives if p.kind is PrimitiveKind.ATOM)

    @cached_property
    def diagonals(self) -> Tuple[Primitive, ...]:
        return tuple(p for p in self.primitives if p.kind is PrimitiveKind.DIAGONAL_SEGMENT)

    @property
    def has_atoms(self) -> bool:
        return bool(self.atoms)

    @property
    def has_diagonals(self) -> bool:
        return bool(self.diagonals)

    def cdf(self, x: RationalLike, y: RationalLike) -> Fraction:
        return self.rect_mass(Rectangle(ZERO, to_rational(x), ZERO, to_rational(y)))

    def rect_mass(self, rect: Rectangle) -> Fraction:
        return sum((p.mass_in(rect) for p in self.primitives), ZERO)

    def __len__(self) -> int:
        return len(self.primitives)

    def __repr__(self) -> str:
        return f"CompositeMeasure(name={self.name!r}, primitives={len(self.primitives)})"


def cdf(mu: CompositeMeasure, x: RationalLike, y: RationalLike) -> Fraction:
    """Mass of the closed rectangle [0,x] x [0,y]."""
    x, y = to_rational(x), to_rational(y)
    if not (ZERO <= x <= ONE and ZERO <= y <= ONE):
        raise InvalidRectangleError(f"cdf point ({x},{y}) outside the unit square")
    return mu.cdf(x, y)


def rect_mass(mu: CompositeMeasure, rect: Rectangle) -> Fraction:
    """Mass of the closed rectangle, atoms on the boundary included."""
    return mu.rect_mass(rect)


def step_permuton(pi: Permutation) -> CompositeMeasure:
    """The uniform measure on the n base squares of pi (pi-hat)."""
    n = pi.n
    mass = Fraction(1, n)
    prims = [
        Primitive.uniform(Fraction(i - 1, n), Fraction(i, n), Fraction(v - 1, n), Fraction(v, n), mass)
        for i, v in enumerate(pi.values, start=1)
    ]
    return CompositeMeasure(tuple(prims), name=f"step:{pi}")


def point_measure(pi: Permutation) -> CompositeMeasure:
    """Atoms of mass 1/n at (i/n, pi(i)/n)."""
    n = pi.n
    mass = Fraction(1, n)
    prims = [
        Primitive.atom(Fraction(i, n), Fraction(v, n), mass)
        for i, v in enumerate(pi.values, start=1)
    ]
    return CompositeMeasure(tuple(prims), name=f"points:{pi}")


# ============================================================================
# BUILT-IN PERMUTONS
# ============================================================================


@dataclass(frozen=True)
class ExchangeSpec:
    """
    Piecewise isometric exchange of [0,1].

    ``cuts`` split [0,1] into pieces; piece i is moved to slot ``order[i]`` of
    the image and keeps (+) or flips (-) its orientation.
    """

    cuts: Tuple[Fraction, ...]
    order: Tuple[int, ...]
    signs: Tuple[int, ...]

    def __post_init__(self):
        cuts = tuple(to_rational(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        points = (ZERO,) + cuts + (ONE,)
        if any(lo >= hi for lo, hi in zip(points, points[1:])):
            raise ExchangeSpecError(
                f"cuts {[str(c) for c in cuts]} do not partition [0,1] into intervals"
            )
        pieces = len(cuts) + 1
        if sorted(self.order) != list(range(1, pieces + 1)):
            raise ExchangeSpecError(
                f"order {self.order} is not a permutation of the {pieces} pieces"
            )
        if len(self.signs) != pieces or any(s not in (1, -1) for s in self.signs):
            raise ExchangeSpecError(f"need {pieces} signs in {{+1,-1}}, got {self.signs}")

    @classmethod
    def parse(cls, text: str) -> "ExchangeSpec":
        """Parse "cuts=1/2;order=21;signs=++"."""
        fields: Dict[str, str] = {}
        for part in text.split(";"):
            if not part.strip():
                continue
            key, sep, value = part.partition("=")
            if not sep:
                raise ExchangeSpecError(f"malformed exchange field {part!r}")
            fields[key.strip()] = value.strip()
        try:
            cuts = tuple(to_rational(c) for c in fields.get("cuts", "").split(",") if c)
            order = tuple(parse_permutation(fields["order"]).values)
            sign_text = fields.get("signs", "+" * (len(cuts) + 1))
        except (KeyError, ValueError, InvalidPermutationError) as exc:
            raise ExchangeSpecError(f"malformed exchange spec {text!r}: {exc}") from exc
        signs = tuple(1 if ch == "+" else -1 if ch == "-" else 0 for ch in sign_text)
        return cls(cuts, order, signs)


def interval_exchange(spec: ExchangeSpec) -> CompositeMeasure:
    """Graph measure of the exchange: one diagonal segment per piece."""
    points = (ZERO,) + spec.cuts + (ONE,)
    lengths = [hi - lo for lo, hi in zip(points, points[1:])]
    by_slot = sorted(range(len(lengths)), key=lambda i: spec.order[i])
    starts = dict(zip(by_slot, accumulate((lengths[i] for i in by_slot), initial=ZERO)))
    prims = []
    for i, (lo, length) in enumerate(zip(points, lengths)):
        y0 = starts[i]
        prims.append(Primitive.diagonal(lo, lo + length, y0, y0 + length, length, spec.signs[i]))
    return CompositeMeasure(tuple(prims), name="interval_exchange")


BUILTIN_NAMES = ("lebesgue", "figure1", "identity_graph", "reverse_graph", "interval_exchange")


def builtin(name: str, params: Optional[Union[str, Mapping[str, Any], ExchangeSpec]] = None) -> CompositeMeasure:
    """
    Named permutons.

    - lebesgue: uniform measure on the unit square
    - figure1: mass 1/2 on the diagonal of [0,1/2]^2, mass 1/2 uniform on [1/2,1]^2
    - identity_graph / reverse_graph: the main / anti diagonal
    - interval_exchange: graph of a piecewise isometry, params as ExchangeSpec,
      mapping or "cuts=1/2;order=21;signs=++"
    """
    if name == "lebesgue":
        return CompositeMeasure((Primitive.uniform(0, 1, 0, 1, 1),), name="lebesgue")
    if name == "figure1":
        return CompositeMeasure(
            (
                Primitive.diagonal(0, HALF, 0, HALF, HALF, 1),
                Primitive.uniform(HALF, 1, HALF, 1, HALF),
            ),
            name="figure1",
        )
    if name == "identity_graph":
        return CompositeMeasure((Primitive.diagonal(0, 1, 0, 1, 1, 1),), name="identity_graph")
    if name == "reverse_graph":
        return CompositeMeasure((Primitive.diagonal(0, 1, 0, 1, 1, -1),), name="reverse_graph")
    if name == "interval_exchange":
        if params is None:
            raise ExchangeSpecError("interval_exchange needs cuts, order and signs")
        if isinstance(params, ExchangeSpec):
            spec = params
        elif isinstance(params, str):
            spec = ExchangeSpec.parse(params)
        else:
            signs = params.get("signs", "+" * (len(params.get("cuts", ())) + 1))
            if isinstance(signs, str):
                signs = tuple(1 if ch == "+" else -1 if ch == "-" else 0 for ch in signs)
            order = params["order"]
            if isinstance(order, str):
                order = parse_permutation(order).values
            spec = ExchangeSpec(tuple(params.get("cuts", ())), tuple(order), tuple(signs))
        measure = interval_exchange(spec)
        return measure
    raise InvalidMeasureError(
        f"unknown builtin {name!r}; choose from {', '.join(BUILTIN_NAMES)}"
    )


# ============================================================================
# TRANSFORMS AND VALIDATION
# ============================================================================

SYMMETRIES = {
    "identity": (),
    "reverse": ("reverse",),
    "complement": ("complement",),
    "inverse": ("inverse",),
    "reverse_complement": ("reverse", "complement"),
    "reverse_inverse": ("reverse", "inverse"),
    "complement_inverse": ("complement", "inverse"),
    "reverse_complement_inverse": ("reverse", "complement", "inverse"),
}


def transform(mu: CompositeMeasure, symmetry: str) -> CompositeMeasure:
    """Image of mu under one of the eight symmetries of the square."""
    if symmetry not in SYMMETRIES:
        raise ValueError(f"unknown symmetry {symmetry!r}")
    prims = mu.primitives
    for step in SYMMETRIES[symmetry]:
        prims = tuple(p.transformed(step) for p in prims)
    return CompositeMeasure(prims, name=f"{mu.name}|{symmetry}")


def transform_permutation(pi: Permutation, symmetry: str) -> Permutation:
    for step in SYMMETRIES[symmetry]:
        pi = getattr(pi, step)()
    return pi


def scale_into(mu: CompositeMeasure, x0: RationalLike, y0: RationalLike, scale: RationalLike) -> List[Primitive]:
    """Primitives of mu mapped into the square [x0, x0+scale] x [y0, y0+scale], masses scaled."""
    x0, y0, scale = to_rational(x0), to_rational(y0), to_rational(scale)
    return [p.scaled(x0, y0, scale, scale) for p in mu.primitives]


@dataclass
class ValidationReport:
    """Outcome of validate_measure."""

    ok: bool
    total_mass: Fraction
    max_x_deviation: Fraction
    max_y_deviation: Fraction
    has_atoms: bool
    primitive_count: int
    errors: List[str] = field(default_factory=list)

    @property
    def max_marginal_deviation(self) -> Fraction:
        return max(self.max_x_deviation, self.max_y_deviation)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "total_mass": str(self.total_mass),
            "max_x_deviation": str(self.max_x_deviation),
            "max_y_deviation": str(self.max_y_deviation),
            "has_atoms": self.has_atoms,
            "primitive_count": self.primitive_count,
            "errors": list(self.errors),
        }


def marginal_deviation(mu: CompositeMeasure) -> Tuple[Fraction, Fraction]:
    """
    Exact (x, y) marginal deviations by a sweep over primitive edges.

    Every primitive spreads its mass uniformly over its x- and y-projections,
    so each marginal CDF is piecewise linear with jumps only at atoms; values
    and left limits at the breakpoints cover the supremum.
    """
    result = []
    for axis in ("x", "y"):
        slopes: Dict[Fraction, Fraction] = {}
        jumps: Dict[Fraction, Fraction] = {}
        for prim in mu.primitives:
            r = prim.region
            lo, hi = (r.a, r.b) if axis == "x" else (r.c, r.d)
            if lo == hi:
                jumps[lo] = jumps.get(lo, ZERO) + prim.mass
                continue
            density = prim.mass / (hi - lo)
            slopes[lo] = slopes.get(lo, ZERO) + density
            slopes[hi] = slopes.get(hi, ZERO) - density
        worst, value, slope, last = ZERO, ZERO, ZERO, ZERO
        for t in sorted(set(slopes) | set(jumps) | {ONE}):
            value += slope * (t - last)
            worst = max(worst, abs(value - t))
            value += jumps.get(t, ZERO)
            worst = max(worst, abs(value - t))
            slope += slopes.get(t, ZERO)
            last = t
        result.append(worst)
    return result[0], result[1]


def validate_measure(
    mu: CompositeMeasure, permuton: bool = True, tolerance: RationalLike = 0
) -> ValidationReport:
    """
    Check total mass and, for permutons, uniform marginals and absence of atoms.

    The marginal deviation is exact; ``tolerance`` is the largest deviation
    still accepted.
    """
    tolerance = to_rational(tolerance)
    total = sum((p.mass for p in mu.primitives), ZERO)
    dev_x, dev_y = marginal_deviation(mu)
    errors = []
    if total != ONE:
        errors.append(f"total mass {total} != 1")
    if permuton:
        if mu.has_atoms:
            errors.append(f"{len(mu.atoms)} atom(s) present")
        if dev_x > tolerance:
            errors.append(f"x-marginal deviates by {dev_x}")
        if dev_y > tolerance:
            errors.append(f"y-marginal deviates by {dev_y}")
    report = ValidationReport(
        ok=not errors,
        total_mass=total,
        max_x_deviation=dev_x,
        max_y_deviation=dev_y,
        has_atoms=mu.has_atoms,
        primitive_count=len(mu.primitives),
        errors=errors,
    )
    logger.debug("validated %s: %s", mu.name, report.errors or "ok")
    return report


def require_permuton(mu: CompositeMeasure) -> None:
    report = validate_measure(mu, permuton=True)
    if not report.ok:
        raise InvalidMeasureError(f"{mu.name} is not a permuton: {'; '.join(report.errors)}")


def common_denominator(values: Iterable[Fraction]) -> int:
    den = 1
    for v in values:
        den = lcm(den, v.denominator)
    return den


def _atanh_bounds(z: Fraction, terms: int) -> Tuple[Fraction, Fraction]:
    """2 atanh(z) for 0 <= z < 1: partial sum and partial sum plus the geometric tail."""
    total, power, z2 = ZERO, z, z * z
    for k in range(terms):
        total += power / (2 * k + 1)
        power *= z2
    tail = power / ((2 * terms + 1) * (1 - z2))
    return 2 * total, 2 * (total + tail)


def log_bounds(n: int, terms: int = 24) -> Tuple[Fraction, Fraction]:
    """
    Rationals lo <= log(n) <= hi for an integer n >= 1.

    n = 2^e m with 1 <= m < 2; log 2 = 2 atanh(1/3) and log m = 2 atanh((m - 1) / (m + 1)),
    both arguments at most 1/3, so hi - lo shrinks like (e + 1) 9^-terms.
    """
    if n < 1:
        raise ValueError(f"log_bounds needs n >= 1 (got {n})")
    e = n.bit_length() - 1
    m = Fraction(n, 2**e)
    lo2, hi2 = _atanh_bounds(Fraction(1, 3), terms)
    lom, him = _atanh_bounds((m - 1) / (m + 1), terms)
    return e * lo2 + lom, e * hi2 + him
