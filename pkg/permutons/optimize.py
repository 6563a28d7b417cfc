"""
Optimal Permutation Approximation
=================================

PURPOSE:
Compute D_n(mu) = min over pi in Sym(n) of d(mu, step_permuton(pi)), exactly
by branch-and-bound or enumeration and heuristically by local search, plus
lower-bound witnesses at Holder cusps and decay experiments over n.

CORE LOGIC:
- ``StepEvaluator`` fixes the refined grid of mu and {i/n} once; the step
  permuton of any pi on that grid is a mask over the same cells, so every
  candidate is scored by the exact distance engine without rebuilding axes.
- Branch-and-bound fills columns left to right. Rectangles inside
  [0, j/n] x [0,1] only see assigned columns, so the distance restricted to
  those slots is a lower bound that never decreases along a branch.
- Budgets count node expansions (search) or evaluations (local search), never
  wall-clock time, so runs are deterministic.

EXAMPLE USAGE:
    cert = exact_dn(builtin("figure1"), 8)
    cert.distance, str(cert.permutation)      # (Fraction(1, 8), "12345678")
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import permutations
from math import factorial, log
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.base_config import settings
from permutons.core import (
    ONE,
    ZERO,
    CompositeMeasure,
    Permutation,
    Rectangle,
    require_permuton,
    step_permuton,
    to_rational,
)
from permutons.exceptions import (
    EnumerationLimitError,
    InternalError,
    InvalidMeasureError,
)
from permutons.grid import CellTableBuilder, GridMeasure, check_grid_size, merged_axes
from permutons.lowdisc import hammersley, quantile_permutation, regularize
from permutons.metrics import diagonals_are_sparse, grid_distance
from permutons.parallel import parallel_map
from permutons.rng import SeedLike, make_rng, spawn_generators

logger = logging.getLogger(__name__)


class ApproxMethod(Enum):
    EXHAUSTIVE = "exhaustive"
    BRANCH_AND_BOUND = "branch_and_bound"
    LOCAL_SEARCH = "local_search"
    QUANTILE = "quantile"
    HAMMERSLEY_REGULARIZED = "hammersley_regularized"


@dataclass(frozen=True)
class ApproxCertificate:
    """A permutation with its exact distance to mu and the witnessing rectangle."""

    permutation: Permutation
    distance: Fraction
    witness: Rectangle
    optimal: bool
    method: ApproxMethod
    minimizers: Tuple[Permutation, ...] = ()
    expansions: int = 0

    def __post_init__(self):
        if self.optimal and self.method not in (ApproxMethod.EXHAUSTIVE, ApproxMethod.BRANCH_AND_BOUND):
            raise InternalError(f"method {self.method.value} cannot certify optimality")

    @property
    def n(self) -> int:
        return self.permutation.n

    def to_dict(self) -> Dict[str, Any]:
        return {
            "permutation": list(self.permutation.values),
            "distance": str(self.distance),
            "distance_float": float(self.distance),
            "witness": [str(v) for v in self.witness.as_tuple()],
            "optimal": self.optimal,
            "method": self.method.value,
            "minimizers": [list(p.values) for p in self.minimizers],
            "expansions": self.expansions,
        }


# ============================================================================
# EVALUATION ON A FIXED GRID
# ============================================================================


class StepEvaluator:
    """
    Exact d(mu, step_permuton(pi)) for many pi of one size n.

    Also scores partial permutations: the distance restricted to the x-slots
    left of j/n, where the first j values are assigned.
    """

    def __init__(self, mu: CompositeMeasure, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        require_permuton(mu)
        self.mu = mu
        self.n = n
        reference = step_permuton(Permutation.identity(n))
        self.x_axis, self.y_axis = merged_axes((mu, reference), refine=True)
        check_grid_size(self.x_axis, self.y_axis)
        joint = CellTableBuilder(self.x_axis, self.y_axis, ((1, mu), (-1, reference)))
        self.scale = joint.scale
        own = CellTableBuilder(self.x_axis, self.y_axis, ((1, mu),))
        factor = self.scale // own.scale
        table = own.dense()
        dtype = joint.dtype
        self.M_mu = table.total.astype(dtype) * factor
        self.U_mu = table.uniform.astype(dtype) * factor
        self.Dp = table.diagonal.astype(dtype) * factor
        self.Dm = table.antidiagonal.astype(dtype) * factor
        if (np.any(self.Dp != 0) or np.any(self.Dm != 0)) and not diagonals_are_sparse(
            GridMeasure(self.x_axis, self.y_axis, self.M_mu, self.scale, self.U_mu, self.Dp, self.Dm)
        ):
            raise InvalidMeasureError(
                "exact search needs diagonal segments with disjoint refined columns and rows",
                {"measure": mu.name},
            )
        k = Fraction(n) / (self.x_axis.denominator * self.y_axis.denominator) * self.scale
        if k.denominator != 1:
            raise InternalError("step permuton density is not integral at the joint scale")
        self.step_block = int(k) * np.outer(joint.len_x, joint.len_y).astype(dtype)
        self.column_of = np.array([int(s.lo * n) for s in self.x_axis.slots], dtype=np.int64)
        self.band_of = np.array([int(s.lo * n) for s in self.y_axis.slots], dtype=np.int64)
        self.prefix_slots = [int(np.count_nonzero(self.column_of < j)) for j in range(n + 1)]
        self.evaluations = 0

    def grid_for(self, values: Sequence[int]) -> GridMeasure:
        """Difference grid for a (possibly partial) permutation in one-line notation."""
        j = len(values)
        count = self.prefix_slots[j]
        targets = np.array([v - 1 for v in values], dtype=np.int64)
        columns = self.column_of[:count]
        mask = self.band_of[None, :] == targets[columns][:, None]
        step = np.where(mask, self.step_block[:count], 0).astype(self.M_mu.dtype)
        return GridMeasure(
            self.x_axis.prefix(count) if j < self.n else self.x_axis,
            self.y_axis,
            self.M_mu[:count] - step,
            self.scale,
            self.U_mu[:count] - step,
            self.Dp[:count],
            self.Dm[:count],
        )

    def evaluate(self, values: Sequence[int]) -> Tuple[Fraction, Rectangle]:
        """(|value|, witness) for a full or partial assignment."""
        self.evaluations += 1
        if len(values) == 0:
            return ZERO, Rectangle(ZERO, ZERO, ZERO, ZERO)
        signed, witness = grid_distance(self.grid_for(values))
        return abs(signed), witness

    def certificate(self, pi: Permutation, method: ApproxMethod, **extra) -> ApproxCertificate:
        value, witness = self.evaluate(pi.values)
        return ApproxCertificate(pi, value, witness, extra.pop("optimal", False), method, **extra)


# ============================================================================
# EXACT SEARCH
# ============================================================================


@dataclass
class _Incumbent:
    value: Fraction
    permutation: Optional[Tuple[int, ...]] = None
    witness: Optional[Rectangle] = None
    from_search: bool = False
    minimizers: List[Tuple[int, ...]] = field(default_factory=list)


class BranchAndBound:
    """
    Depth-first search over one-line prefixes in lexicographic order.

    A node is pruned when its prefix bound exceeds the incumbent, or equals it
    once the incumbent came from this search (later leaves are
    lexicographically larger). With ``all_minimizers`` only strict excess
    prunes.
    """

    def __init__(
        self,
        evaluator: StepEvaluator,
        upper: Fraction,
        budget: int,
        all_minimizers: bool = False,
    ):
        self.evaluator = evaluator
        self.n = evaluator.n
        self.incumbent = _Incumbent(value=upper)
        self.budget = budget
        self.all_minimizers = all_minimizers
        self.expansions = 0
        self.exhausted = False

    def _prune(self, bound: Fraction) -> bool:
        best = self.incumbent.value
        if bound > best:
            return True
        return bound == best and self.incumbent.from_search and not self.all_minimizers

    def _offer(self, values: Tuple[int, ...], value: Fraction, witness: Rectangle) -> None:
        inc = self.incumbent
        if value < inc.value or (value == inc.value and not inc.from_search):
            inc.value, inc.permutation, inc.witness, inc.from_search = value, values, witness, True
            inc.minimizers = [values]
        elif value == inc.value:
            inc.minimizers.append(values)

    def _search(self, prefix: List[int], free: List[int]) -> None:
        if self.exhausted:
            return
        if self.expansions >= self.budget:
            self.exhausted = True
            return
        self.expansions += 1
        bound, witness = self.evaluator.evaluate(prefix)
        if len(prefix) == self.n:
            if bound <= self.incumbent.value:
                self._offer(tuple(prefix), bound, witness)
            return
        if self._prune(bound):
            return
        for idx, value in enumerate(free):
            prefix.append(value)
            self._search(prefix, free[:idx] + free[idx + 1 :])
            prefix.pop()

    def run(self, root: Optional[int] = None) -> _Incumbent:
        values = list(range(1, self.n + 1))
        if root is None:
            self._search([], values)
        else:
            self._search([root], [v for v in values if v != root])
        return self.incumbent


def _initial_upper(evaluator: StepEvaluator) -> Tuple[Fraction, Permutation]:
    """Cheap incumbents: identity, its reverse and the regularized Hammersley set."""
    n = evaluator.n
    candidates = [
        Permutation.identity(n),
        Permutation.identity(n).reverse(),
        regularize(hammersley(n)),
    ]
    try:
        candidates.append(quantile_permutation(evaluator.mu, n))
    except InvalidMeasureError:
        pass
    scored = [(evaluator.evaluate(pi.values)[0], pi.values, pi) for pi in candidates]
    value, _, pi = min(scored, key=lambda item: (item[0], item[1]))
    return value, pi


def exact_dn(
    mu: CompositeMeasure,
    n: int,
    budget: Optional[int] = None,
    all_minimizers: bool = False,
    threads: Optional[int] = None,
) -> ApproxCertificate:
    """
    D_n(mu) with a lexicographically first minimizer.

    Root subtrees (fixed pi(1)) are searched independently, each with an equal
    share of the budget and the same heuristic incumbent, so the result does
    not depend on the thread count. When the budget runs out the best
    permutation seen is returned with optimal=False.
    """
    evaluator = StepEvaluator(mu, n)
    if n == 1:
        return evaluator.certificate(Permutation((1,)), ApproxMethod.BRANCH_AND_BOUND, optimal=True,
                                     minimizers=(Permutation((1,)),), expansions=1)
    budget = budget or settings.search_budget
    upper, fallback = _initial_upper(evaluator)
    share = max(1, budget // n)

    def search_root(root: int):
        local = BranchAndBound(evaluator, upper, share, all_minimizers)
        result = local.run(root)
        return result, local.expansions, local.exhausted

    outcomes = parallel_map(search_root, list(range(1, n + 1)), threads)
    best: Optional[_Incumbent] = None
    expansions = sum(o[1] for o in outcomes)
    exhausted = any(o[2] for o in outcomes)
    minimizers: List[Tuple[int, ...]] = []
    for incumbent, _, _ in outcomes:
        if not incumbent.from_search:
            continue
        if best is None or incumbent.value < best.value:
            best = incumbent
            minimizers = list(incumbent.minimizers)
        elif incumbent.value == best.value:
            minimizers.extend(incumbent.minimizers)
    if best is None:
        # nothing beat or matched the heuristic; only possible when the budget ran out
        logger.warning("search budget exhausted before any leaf; returning heuristic incumbent")
        return evaluator.certificate(fallback, ApproxMethod.BRANCH_AND_BOUND, optimal=False, expansions=expansions)
    if exhausted:
        logger.warning("search budget of %d expansions exhausted; result may not be optimal", budget)
    ordered = tuple(Permutation(v) for v in sorted(set(minimizers)))
    pi = ordered[0]
    value, witness = evaluator.evaluate(pi.values)
    logger.info("D_%d = %s attained by %s (%d expansions)", n, value, pi, expansions)
    return ApproxCertificate(
        permutation=pi,
        distance=value,
        witness=witness,
        optimal=not exhausted,
        method=ApproxMethod.BRANCH_AND_BOUND,
        minimizers=ordered if all_minimizers else (pi,),
        expansions=expansions,
    )


def exhaustive_dn(mu: CompositeMeasure, n: int) -> ApproxCertificate:
    """Plain enumeration of Sym(n); the reference for the branch-and-bound search."""
    if factorial(n) > settings.exhaustive_limit:
        raise EnumerationLimitError(
            f"{n}! candidates exceed the enumeration limit {settings.exhaustive_limit}",
            {"n": n, "limit": settings.exhaustive_limit},
        )
    evaluator = StepEvaluator(mu, n)
    best_value: Optional[Fraction] = None
    minimizers: List[Tuple[int, ...]] = []
    for values in permutations(range(1, n + 1)):
        value, _ = evaluator.evaluate(values)
        if best_value is None or value < best_value:
            best_value, minimizers = value, [values]
        elif value == best_value:
            minimizers.append(values)
    ordered = tuple(Permutation(v) for v in minimizers)
    return evaluator.certificate(
        ordered[0], ApproxMethod.EXHAUSTIVE, optimal=True, minimizers=ordered, expansions=evaluator.evaluations
    )


# ============================================================================
# HEURISTICS
# ============================================================================


def heuristic_permutation(mu: CompositeMeasure, n: int, method: Union[str, ApproxMethod]) -> Permutation:
    method = ApproxMethod(method) if not isinstance(method, ApproxMethod) else method
    if method is ApproxMethod.QUANTILE:
        return quantile_permutation(mu, n)
    if method is ApproxMethod.HAMMERSLEY_REGULARIZED:
        return regularize(hammersley(n))
    raise ValueError(f"{method.value} is not a constructive heuristic")


def heuristic_certificate(mu: CompositeMeasure, n: int, method: Union[str, ApproxMethod]) -> ApproxCertificate:
    method = ApproxMethod(method) if not isinstance(method, ApproxMethod) else method
    pi = heuristic_permutation(mu, n, method)
    return StepEvaluator(mu, n).certificate(pi, method)


def neighbours(values: Tuple[int, ...]) -> List[Tuple[int, ...]]:
    """Adjacent transpositions, general transpositions and segment reversals, without repeats."""
    n = len(values)
    seen = set()
    result = []
    for i in range(n):
        for j in range(i + 1, n):
            swapped = list(values)
            swapped[i], swapped[j] = swapped[j], swapped[i]
            reversed_segment = values[:i] + values[i : j + 1][::-1] + values[j + 1 :]
            for candidate in (tuple(swapped), reversed_segment):
                if candidate not in seen:
                    seen.add(candidate)
                    result.append(candidate)
    return result


def _descend(
    evaluator: StepEvaluator, start: Tuple[int, ...], budget: int
) -> Tuple[Fraction, Tuple[int, ...], Rectangle, int]:
    """Steepest descent from ``start``; ties go to the lexicographically smallest neighbour."""
    used = 1
    value, witness = evaluator.evaluate(start)
    current = start
    while used < budget:
        best = None
        for candidate in neighbours(current):
            if used >= budget:
                break
            used += 1
            cand_value, cand_witness = evaluator.evaluate(candidate)
            if best is None or (cand_value, candidate) < (best[0], best[1]):
                best = (cand_value, candidate, cand_witness)
        if best is None or best[0] >= value:
            break
        value, current, witness = best
    return value, current, witness, used


def local_search_dn(
    mu: CompositeMeasure,
    n: int,
    init: Union[Permutation, str, ApproxMethod, None] = ApproxMethod.QUANTILE,
    budget: Optional[int] = None,
    seed: SeedLike = 0,
    restarts: int = 4,
    threads: Optional[int] = None,
) -> ApproxCertificate:
    """
    Steepest descent from ``init`` followed by ``restarts`` descents from
    random segment-reversal perturbations of the initial permutation.
    Each restart has its own spawned seed and an equal share of the budget.
    """
    evaluator = StepEvaluator(mu, n)
    budget = budget or max(100, settings.search_budget // 100)
    if isinstance(init, Permutation):
        start = init
    elif init is None or init == "identity":
        start = Permutation.identity(n)
    elif init == "random":
        start = Permutation(tuple(int(v) + 1 for v in make_rng(seed).permutation(n)))
    else:
        try:
            start = heuristic_permutation(mu, n, init)
        except InvalidMeasureError:
            logger.warning("init %s unavailable for %s; starting from the Hammersley permutation", init, mu.name)
            start = heuristic_permutation(mu, n, ApproxMethod.HAMMERSLEY_REGULARIZED)
    if start.n != n:
        raise ValueError(f"initial permutation has size {start.n}, expected {n}")
    share = max(1, budget // (restarts + 1))
    generators = spawn_generators(seed, restarts)

    def perturbed(rng: np.random.Generator) -> Tuple[int, ...]:
        values = list(start.values)
        for _ in range(max(1, n // 4)):
            i, j = sorted(int(v) for v in rng.integers(0, n, size=2))
            values[i : j + 1] = values[i : j + 1][::-1]
        return tuple(values)

    jobs = [start.values] + [perturbed(rng) for rng in generators]

    def run(job: Tuple[int, ...]):
        return _descend(evaluator, job, share)

    results = parallel_map(run, jobs, threads)
    value, values, witness, _ = min(results, key=lambda r: (r[0], r[1]))
    used = sum(r[3] for r in results)
    logger.info("local search n=%d: %s after %d evaluations", n, value, used)
    return ApproxCertificate(
        permutation=Permutation(values),
        distance=value,
        witness=witness,
        optimal=False,
        method=ApproxMethod.LOCAL_SEARCH,
        expansions=used,
    )


# ============================================================================
# HOLDER CUSP WITNESS
# ============================================================================


@dataclass(frozen=True)
class HolderSpec:
    """f is Holder-alpha at x0 with constant C: |f(x) - f(x0)| <= C |x - x0|^alpha."""

    x0: Fraction
    C: Fraction
    alpha: Fraction
    f_at_x0: Fraction

    def __post_init__(self):
        for name in ("x0", "C", "alpha", "f_at_x0"):
            object.__setattr__(self, name, to_rational(getattr(self, name)))
        if self.C < 1:
            raise ValueError(f"C must be >= 1 (got {self.C})")
        if not ZERO < self.alpha <= ONE:
            raise ValueError(f"alpha must lie in (0, 1] (got {self.alpha})")
        if not ZERO <= self.x0 <= ONE:
            raise ValueError("x0 must lie in [0, 1]")


@dataclass(frozen=True)
class HolderWitness:
    rectangle: Rectangle
    bound: Fraction
    t: Fraction
    exact_t: bool


def integer_root(value: int, p: int) -> Optional[int]:
    """Exact p-th root of a non-negative integer, or None."""
    if value < 0:
        return None
    lo, hi = 0, 1
    while hi**p <= value:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if mid**p < value:
            lo = mid + 1
        else:
            hi = mid
    return lo if lo**p == value else None


def rational_power_floor(K: Fraction, alpha: Fraction, bits: int = 32) -> Tuple[Fraction, bool]:
    """
    K^(1/alpha), exactly when rational, else the largest k / 2^bits below it.

    With alpha = p/q the target t satisfies t^p = K^q, so every comparison is
    an integer comparison.
    """
    p, q = alpha.numerator, alpha.denominator
    power = K**q
    num, den = integer_root(power.numerator, p), integer_root(power.denominator, p)
    if num is not None and den is not None:
        return Fraction(num, den), True
    scale = 2**bits
    lo, hi = 0, scale
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if Fraction(mid, scale) ** p <= power:
            lo = mid
        else:
            hi = mid - 1
    return Fraction(lo, scale), False


def holder_witness(spec: HolderSpec, pi: Permutation) -> HolderWitness:
    """
    A rectangle inside the base square above x0 that the graph of f misses.

    Its step-permuton mass n * area is a lower bound on d(mu_f, step(pi)).
    """
    n = pi.n
    K = 1 / (2 * spec.C * n * (spec.alpha + 1))
    t, exact = rational_power_floor(K, spec.alpha)
    half = Fraction(1, 2 * n)
    if not ZERO < t < half:
        raise InternalError("cusp width outside (0, 1/(2n))", {"t": str(t), "n": n})
    height = half - spec.C * K
    column = max(1, -(-spec.x0.numerator * n // spec.x0.denominator))
    left, right = Fraction(column - 1, n), Fraction(column, n)
    if spec.x0 + t <= right:
        a, b = spec.x0, spec.x0 + t
    else:
        a, b = spec.x0 - t, spec.x0
    if a < left:
        raise InternalError("cusp window leaves its column", {"x0": str(spec.x0), "n": n})
    band_lo, band_hi = Fraction(pi(column) - 1, n), Fraction(pi(column), n)
    reach = spec.C * K
    below = max(ZERO, min(band_hi, spec.f_at_x0 - reach) - band_lo)
    above = max(ZERO, band_hi - max(band_lo, spec.f_at_x0 + reach))
    if below >= above:
        c, d = band_lo, band_lo + height
    else:
        c, d = band_hi - height, band_hi
    rect = Rectangle(a, b, c, d)
    return HolderWitness(rectangle=rect, bound=n * rect.area, t=t, exact_t=exact)


# ============================================================================
# DECAY EXPERIMENT
# ============================================================================


@dataclass(frozen=True)
class DecayRow:
    method: str
    n: int
    distance: Fraction
    witness: Rectangle
    seed: int
    optimal: bool = False

    @property
    def scaled(self) -> float:
        return self.n * float(self.distance)


@dataclass(frozen=True)
class DecayTable:
    measure: str
    rows: Tuple[DecayRow, ...]
    slopes: Dict[str, Dict[str, Optional[float]]]


def _fit_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    if len(xs) < 2:
        return None
    slope, _ = np.polyfit(np.asarray(xs), np.asarray(ys), 1)
    return float(slope)


def decay_experiment(
    mu: CompositeMeasure,
    methods: Sequence[Union[str, ApproxMethod]],
    n_list: Sequence[int],
    budget: Optional[int] = None,
    seed: int = 0,
) -> DecayTable:
    """
    Distances achieved by each method at each n, with least-squares slopes of
    log(distance) against log(n) and of log(n * distance) against log(log(n)).
    """
    rows: List[DecayRow] = []
    for method in methods:
        method = ApproxMethod(method) if not isinstance(method, ApproxMethod) else method
        for n in n_list:
            if method is ApproxMethod.LOCAL_SEARCH:
                cert = local_search_dn(mu, n, budget=budget, seed=seed)
            elif method is ApproxMethod.BRANCH_AND_BOUND:
                cert = exact_dn(mu, n, budget=budget)
            elif method is ApproxMethod.EXHAUSTIVE:
                cert = exhaustive_dn(mu, n)
            else:
                cert = heuristic_certificate(mu, n, method)
            rows.append(DecayRow(method.value, n, cert.distance, cert.witness, seed, cert.optimal))
            logger.info("decay %s n=%d distance=%s", method.value, n, cert.distance)
    slopes: Dict[str, Dict[str, Optional[float]]] = {}
    for method in {row.method for row in rows}:
        usable = [r for r in rows if r.method == method and r.distance > 0]
        slopes[method] = {
            "log_distance_vs_log_n": _fit_slope([log(r.n) for r in usable], [log(float(r.distance)) for r in usable]),
            "log_scaled_vs_loglog_n": _fit_slope(
                [log(log(r.n)) for r in usable if r.n > 2],
                [log(r.scaled) for r in usable if r.n > 2],
            ),
        }
    return DecayTable(measure=mu.name, rows=tuple(rows), slopes=slopes)
