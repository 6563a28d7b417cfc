"""
Self-Similar Constructions
==========================

PURPOSE:
Permutation inflation, the fractal permutation sequence driven by a growth
plan, a truncated builder and sampler for the biased Brownian separable
permuton, and the Galton-Watson offspring law used to reason about its
regular points.

CORE LOGIC:
- ``inflate(pi, blocks)`` substitutes blocks[i] into position i of pi.
- A ``GrowthPlan`` is a block-size sequence n_1 < n_2 < ... whose partial
  products N_k satisfy beta' N_k <= N_{k+1}^alpha <= beta N_k; all window
  checks are integer power comparisons.
- ``brownian_build`` expands the three-part decomposition recursively:
  part 0 is a scaled copy split at a pivot drawn from itself, parts 1 and 2
  are scaled copies placed in the gap, side by side in an order set by a
  Bernoulli(p) coin. Nodes of mass <= eps become a leaf carrying 1 - p on
  the increasing diagonal and p on the decreasing one.

ADAPTATION GUIDE:
🔧 To trade accuracy for speed:
1. eps: smaller values give deeper trees and larger rationals
2. depth_max: hard cap on recursion depth
3. gw_population_cap (settings): populations above it count as surviving

EXAMPLE USAGE:
    inflate(make_permutation([2, 1]), [make_permutation([1, 2])] * 2)   # 3412
    plan = choose_sequence(Fraction(1, 2), 2, 1, 3, 3)                    # n = (3, 4, 12)
    build = brownian_build(Fraction(1, 2), Fraction(1, 100), 12, seed=7)
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.stats import beta as beta_distribution

from config.base_config import settings
from permutons.core import (
    ONE,
    ZERO,
    CompositeMeasure,
    Permutation,
    Primitive,
    Rectangle,
    log_bounds,
    marginal_deviation,
    step_permuton,
    to_rational,
)
from permutons.exceptions import GrowthWindowError, InternalError, SizeBudgetError
from permutons.lowdisc import Sampler, hammersley, hammersley_constant, read_patterns, regularize
from permutons.metrics import rect_distance
from permutons.parallel import parallel_map
from permutons.rng import QUANTUM, SeedLike, make_rng, seed_sequence, spawn_generators

logger = logging.getLogger(__name__)

# level bounds are rounded down to multiples of 2^-64
BOUND_SCALE = 2**64


# ============================================================================
# INFLATION
# ============================================================================


def inflate(pi: Permutation, blocks: Sequence[Permutation]) -> Permutation:
    """
    pi[blocks[0], ..., blocks[n-1]]: position block i holds a copy of blocks[i]
    shifted above every block j with pi(j) < pi(i).
    """
    if len(blocks) != pi.n:
        raise ValueError(f"inflate needs {pi.n} blocks, got {len(blocks)}")
    sizes_by_value = [0] * (pi.n + 1)
    for i, block in enumerate(blocks):
        sizes_by_value[pi.values[i]] = block.n
    offsets = [0] * (pi.n + 2)
    for v in range(1, pi.n + 1):
        offsets[v + 1] = offsets[v] + sizes_by_value[v]
    values: List[int] = []
    for i, block in enumerate(blocks):
        shift = offsets[pi.values[i]]
        values.extend(v + shift for v in block.values)
    return Permutation(tuple(values))


# ============================================================================
# GROWTH PLANS AND THE FRACTAL SEQUENCE
# ============================================================================


def _in_window(alpha: Fraction, beta: Fraction, beta_prime: Fraction, N_k: int, N_next: int) -> Tuple[bool, bool]:
    """(lower holds, upper holds) for beta' N_k <= N_next^alpha <= beta N_k."""
    p, q = alpha.numerator, alpha.denominator
    lhs = Fraction(N_next) ** p
    return (beta_prime * N_k) ** q <= lhs, lhs <= (beta * N_k) ** q


@dataclass(frozen=True)
class GrowthPlan:
    alpha: Fraction
    beta: Fraction
    beta_prime: Fraction
    n_seq: Tuple[int, ...]

    def __post_init__(self):
        for name in ("alpha", "beta", "beta_prime"):
            object.__setattr__(self, name, to_rational(getattr(self, name)))
        object.__setattr__(self, "n_seq", tuple(int(n) for n in self.n_seq))
        if not ZERO < self.alpha <= ONE:
            raise ValueError(f"alpha must lie in (0, 1] (got {self.alpha})")
        if not ZERO < self.beta_prime <= self.beta:
            raise ValueError("need 0 < beta_prime <= beta")
        if not self.n_seq:
            raise ValueError("a growth plan needs at least one block size")
        if any(b <= a for a, b in zip(self.n_seq, self.n_seq[1:])):
            raise ValueError(f"block sizes must increase strictly: {self.n_seq}")
        N = self.N_seq
        for k in range(len(N) - 1):
            low, high = _in_window(self.alpha, self.beta, self.beta_prime, N[k], N[k + 1])
            if not (low and high):
                raise GrowthWindowError(
                    f"N_{k + 2} = {N[k + 1]} leaves the growth window of N_{k + 1} = {N[k]}",
                    {"k": k + 1, "N_k": N[k], "N_next": N[k + 1]},
                )

    @property
    def N_seq(self) -> Tuple[int, ...]:
        products, running = [], 1
        for n in self.n_seq:
            running *= n
            products.append(running)
        return tuple(products)

    @property
    def k_max(self) -> int:
        return len(self.n_seq)

    def to_dict(self) -> Dict[str, object]:
        return {
            "alpha": str(self.alpha),
            "beta": str(self.beta),
            "beta_prime": str(self.beta_prime),
            "n_seq": list(self.n_seq),
            "N_seq": list(self.N_seq),
        }


def _smallest_root_at_least(target: Fraction, p: int) -> int:
    """Smallest integer m >= 0 with m^p >= target."""
    if target <= 0:
        return 0
    hi = 1
    while Fraction(hi) ** p < target:
        hi *= 2
    lo = hi // 2
    while lo < hi:
        mid = (lo + hi) // 2
        if Fraction(mid) ** p >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def choose_sequence(alpha, beta, beta_prime, n1: int, k_max: int = 3) -> GrowthPlan:
    """
    Greedy plan: each n_{k+1} is the smallest integer above n_k whose product
    N_{k+1} = n_{k+1} N_k reaches the lower edge of the growth window.
    """
    alpha, beta, beta_prime = to_rational(alpha), to_rational(beta), to_rational(beta_prime)
    if not ZERO < alpha <= ONE:
        raise ValueError(f"alpha must lie in (0, 1] (got {alpha})")
    if not (ZERO < beta_prime <= ONE <= beta):
        raise ValueError("need 0 < beta_prime <= 1 <= beta")
    if n1 < 2:
        raise ValueError("n1 must be >= 2")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    p, q = alpha.numerator, alpha.denominator
    n_seq = [n1]
    N_k = n1
    for k in range(1, k_max):
        # n^p N_k^p >= (beta' N_k)^q
        lower = _smallest_root_at_least((beta_prime * N_k) ** q / Fraction(N_k) ** p, p)
        n = max(n_seq[-1] + 1, lower)
        _, fits = _in_window(alpha, beta, beta_prime, N_k, n * N_k)
        if not fits:
            raise GrowthWindowError(
                f"no block size n_{k + 1} > {n_seq[-1]} fits the growth window at N_{k} = {N_k}",
                {"k": k, "N_k": N_k, "smallest_candidate": n},
            )
        n_seq.append(n)
        N_k *= n
        logger.debug("growth plan: n_%d = %d, N_%d = %d", k + 1, n, k + 1, N_k)
    return GrowthPlan(alpha, beta, beta_prime, tuple(n_seq))


def fractal_blocks(plan: GrowthPlan, K: int) -> List[Permutation]:
    return [regularize(hammersley(n)) for n in plan.n_seq[:K]]


def fractal_sequence(plan: GrowthPlan, K: int) -> List[Permutation]:
    """pi_1, ..., pi_K with pi_1 = tau_1 and pi_k = pi_{k-1}[tau_k, ..., tau_k]."""
    if not 1 <= K <= plan.k_max:
        raise ValueError(f"K must lie in 1..{plan.k_max}")
    size = plan.N_seq[K - 1]
    if size > settings.max_fractal_size:
        raise SizeBudgetError(
            f"N_{K} = {size} exceeds the fractal size budget {settings.max_fractal_size}",
            {"K": K, "N_K": size, "limit": settings.max_fractal_size},
        )
    blocks = fractal_blocks(plan, K)
    sequence = [blocks[0]]
    for tau in blocks[1:]:
        previous = sequence[-1]
        sequence.append(inflate(previous, [tau] * previous.n))
    return sequence


def fractal_permutation(plan: GrowthPlan, K: int) -> Permutation:
    return fractal_sequence(plan, K)[-1]


@dataclass(frozen=True)
class LevelBound:
    k: int
    distance: Fraction
    bound: Fraction

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound


def fractal_level_bounds(plan: GrowthPlan, K: int) -> Tuple[float, List[LevelBound]]:
    """
    Distances between successive levels against 4 C log(n_{k+1}) / N_{k+1},
    where C is the largest n log(n)^-1 star(tau-hat, lambda) over the blocks used.

    Every logarithm is replaced by a certified rational bound on the side that
    lowers the bound, so ``holds`` is an exact comparison that never accepts a
    violated inequality.
    """
    sequence = fractal_sequence(plan, K)
    constant = max(hammersley_constant(n) / log_bounds(n)[1] for n in plan.n_seq[:K])
    levels = []
    for k in range(1, K):
        n_next, N_next = plan.n_seq[k], plan.N_seq[k]
        distance = rect_distance(step_permuton(sequence[k - 1]), step_permuton(sequence[k])).value
        exact = 4 * constant * log_bounds(n_next)[0] / N_next
        bound = Fraction(floor(exact * BOUND_SCALE), BOUND_SCALE)
        levels.append(LevelBound(k=k, distance=distance, bound=bound))
        logger.info("fractal level %d: distance %s, bound %.6g", k, distance, float(bound))
    return float(constant), levels


# ============================================================================
# BIASED BROWNIAN SEPARABLE PERMUTON
# ============================================================================


@dataclass(frozen=True)
class BrownianNode:
    """
    One node of a truncated construction tree.

    ``region`` is the image of the node's unit square in its parent's frame;
    part 0 covers the whole parent square because its image is split at the
    pivot. ``mass`` is the node's share of the total mass.
    """

    region: Rectangle
    mass: Fraction
    depth: int
    deltas: Optional[Tuple[Fraction, Fraction, Fraction]] = None
    pivot: Optional[Tuple[Fraction, Fraction]] = None
    beta_sign: Optional[int] = None
    children: Tuple["BrownianNode", ...] = ()

    def __post_init__(self):
        if self.deltas is None:
            return
        if sum(self.deltas, ZERO) != ONE:
            raise InternalError("split proportions do not sum to 1", {"deltas": [str(d) for d in self.deltas]})
        if len(self.children) != 3 or any(
            child.mass != delta * self.mass for child, delta in zip(self.children, self.deltas)
        ):
            raise InternalError("child masses do not match the split")

    @property
    def is_leaf(self) -> bool:
        return self.deltas is None

    def leaves(self) -> int:
        return 1 if self.is_leaf else sum(child.leaves() for child in self.children)

    def height(self) -> int:
        return 0 if self.is_leaf else 1 + max(child.height() for child in self.children)


@dataclass(frozen=True)
class BrownianBuild:
    measure: CompositeMeasure
    tree: BrownianNode
    p: Fraction
    eps: Fraction
    depth_max: int

    @property
    def tolerance(self) -> Fraction:
        """Marginal tolerance the build certifies."""
        return 2 * self.eps


def quantized_dirichlet(rng: np.random.Generator) -> Tuple[Fraction, Fraction, Fraction]:
    """
    Dirichlet(1/2, 1/2, 1/2) from three Gamma(1/2) draws, rounded to k / 2**32
    with every part positive and the parts summing to exactly 1.
    """
    gammas = rng.gamma(0.5, size=3)
    shares = gammas / gammas.sum()
    counts = [max(1, int(np.floor(s * QUANTUM))) for s in shares]
    largest = int(np.argmax(counts))
    counts[largest] += QUANTUM - sum(counts)
    return tuple(Fraction(c, QUANTUM) for c in counts)


def _quadrants(x0: Fraction, y0: Fraction) -> List[Tuple[int, int, Rectangle]]:
    return [
        (ix, iy, Rectangle(x0 if ix else ZERO, ONE if ix else x0, y0 if iy else ZERO, ONE if iy else y0))
        for ix in (0, 1)
        for iy in (0, 1)
    ]


def _placements(
    deltas: Tuple[Fraction, Fraction, Fraction], pivot: Tuple[Fraction, Fraction], beta_sign: int
) -> Tuple[Rectangle, Rectangle]:
    """Squares receiving parts 1 and 2: the images of the unit square under their maps."""
    d0, d1, d2 = deltas
    X0, Y0 = pivot
    x1, y1 = d0 * X0, d0 * Y0 + d2 * beta_sign
    x2, y2 = d0 * X0 + d1, d0 * Y0 + d1 * (1 - beta_sign)
    return Rectangle(x1, x1 + d1, y1, y1 + d1), Rectangle(x2, x2 + d2, y2, y2 + d2)


def _assemble(
    parts: Sequence[CompositeMeasure],
    deltas: Tuple[Fraction, Fraction, Fraction],
    pivot: Tuple[Fraction, Fraction],
    placements: Tuple[Rectangle, Rectangle],
) -> List[Primitive]:
    """Push the three parts through their placement maps and weight them by the split."""
    d0 = deltas[0]
    gap = ONE - d0
    primitives: List[Primitive] = []
    # part 0 is cut at the pivot lines; cut lines carry no mass since builds have no atoms
    for p in parts[0].primitives:
        for ix, iy, quadrant in _quadrants(*pivot):
            piece = p.clipped(quadrant)
            if piece is not None:
                primitives.append(piece.scaled(gap * ix, gap * iy, d0, d0))
    for measure, square, delta in zip(parts[1:], placements, deltas[1:]):
        primitives.extend(p.scaled(square.a, square.c, delta, delta) for p in measure.primitives)
    return primitives


def _sample_pivot(mu: CompositeMeasure, rng: np.random.Generator) -> Tuple[Fraction, Fraction]:
    sampler = Sampler(mu)
    xs, ys = sampler.draw(1, rng)
    return Fraction(int(xs[0]), sampler.denominator), Fraction(int(ys[0]), sampler.denominator)


def leaf_measure(p) -> CompositeMeasure:
    """
    Truncation leaf: mass 1 - p on the increasing diagonal, p on the decreasing one.

    Two points on the same diagonal read that diagonal's pattern and two points
    on different diagonals read 12 with probability 1/2, so the leaf gives
    pattern 12 with probability (1 - p)^2 + p(1 - p) = 1 - p, the two-point law
    of the untruncated measure.
    """
    p = to_rational(p)
    pieces = [(ONE - p, 1), (p, -1)]
    return CompositeMeasure(
        tuple(Primitive.diagonal(ZERO, ONE, ZERO, ONE, mass, sign) for mass, sign in pieces if mass > 0),
        name="leaf",
    )


def _build_node(
    p: float,
    leaf: CompositeMeasure,
    eps: Fraction,
    depth_max: int,
    mass: Fraction,
    depth: int,
    seed: np.random.SeedSequence,
    region: Rectangle,
) -> Tuple[CompositeMeasure, BrownianNode]:
    if mass <= eps or depth >= depth_max:
        return leaf, BrownianNode(region=region, mass=mass, depth=depth)
    own, seed0, seed1, seed2 = seed.spawn(4)
    rng = np.random.default_rng(own)
    deltas = quantized_dirichlet(rng)
    beta_sign = int(rng.random() < p)
    settings_for = (p, leaf, eps, depth_max)
    part0, node0 = _build_node(*settings_for, mass * deltas[0], depth + 1, seed0, Rectangle.unit())
    pivot = _sample_pivot(part0, rng)
    square1, square2 = _placements(deltas, pivot, beta_sign)
    part1, node1 = _build_node(*settings_for, mass * deltas[1], depth + 1, seed1, square1)
    part2, node2 = _build_node(*settings_for, mass * deltas[2], depth + 1, seed2, square2)
    primitives = _assemble((part0, part1, part2), deltas, pivot, (square1, square2))
    node = BrownianNode(
        region=region,
        mass=mass,
        depth=depth,
        deltas=deltas,
        pivot=pivot,
        beta_sign=beta_sign,
        children=(node0, node1, node2),
    )
    return CompositeMeasure(tuple(primitives), name="brownian-node"), node


def brownian_build(p, eps, depth_max: int, seed: SeedLike) -> BrownianBuild:
    """
    Truncated approximation of the biased Brownian separable permuton.

    Each node draws its split, its coin and then its pivot from the finished
    part 0, in that order from its own spawned stream, so the output depends
    only on (p, eps, depth_max, seed).
    """
    p, eps = to_rational(p), to_rational(eps)
    if not ZERO <= p <= ONE:
        raise ValueError(f"p must lie in [0, 1] (got {p})")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if depth_max < 0:
        raise ValueError("depth_max must be >= 0")
    measure, tree = _build_node(
        float(p), leaf_measure(p), eps, depth_max, ONE, 0, seed_sequence(seed), Rectangle.unit()
    )
    measure = CompositeMeasure(measure.primitives, name=f"brownian(p={p},eps={eps})")
    logger.info(
        "brownian build: %d primitives, %d leaves, height %d", len(measure), tree.leaves(), tree.height()
    )
    return BrownianBuild(measure=measure, tree=tree, p=p, eps=eps, depth_max=depth_max)


def brownian_marginal_deviation(build: BrownianBuild) -> Fraction:
    return max(marginal_deviation(build.measure))


def brownian_sample_perm(build: BrownianBuild, k: int, seed: SeedLike) -> Permutation:
    """Pattern of k independent points of the built measure."""
    if k < 1:
        raise ValueError("k must be >= 1")
    sampler = Sampler(build.measure)
    xs, ys = sampler.draw(k, make_rng(seed))
    ranks = read_patterns(xs.reshape(1, k), ys.reshape(1, k))[0]
    return Permutation(tuple(int(r) + 1 for r in ranks))


# ============================================================================
# TWO-POINT PATTERN FREQUENCY
# ============================================================================


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    samples: int

    def within(self, target: float, sigmas: float = 4.0) -> bool:
        return abs(self.mean - target) <= sigmas * max(self.stderr, 1e-12)

    def to_dict(self) -> Dict[str, float]:
        return {"mean": self.mean, "stderr": self.stderr, "samples": self.samples}


def two_point_oracle(p) -> Fraction:
    """
    Probability that two independent points of a random mu^p read as 12.

    Two points either fall in parts 1 and 2 (probability b = 2 E[D1 D2]), where
    the coin fixes the pattern, or reduce to another independent two-point
    question (same part, or a part-0 point against the pivot). So
    q = (1 - b) q + b (1 - p).
    """
    p = to_rational(p)
    a0 = Fraction(3, 2)
    # E[D1 D2] for Dirichlet(1/2, 1/2, 1/2)
    cross = Fraction(1, 4) / (a0 * (a0 + 1))
    b = 2 * cross
    if not ZERO < b < ONE:
        raise InternalError("separation probability outside (0, 1)", {"b": str(b)})
    return b * (ONE - p) / (ONE - (ONE - b))


def _increasing_pairs(build: BrownianBuild, pairs: int, rng: np.random.Generator) -> int:
    sampler = Sampler(build.measure)
    xs, ys = sampler.draw(2 * pairs, rng)
    ranks = read_patterns(xs.reshape(pairs, 2), ys.reshape(pairs, 2))
    return int(np.count_nonzero(ranks[:, 0] < ranks[:, 1]))


def two_point_frequency(
    p,
    builds: int,
    seed: SeedLike,
    pairs: int = 50,
    eps=Fraction(1, 20),
    depth_max: int = 8,
    threads: Optional[int] = None,
) -> MonteCarloEstimate:
    """
    Frequency of pattern 12 over ``pairs`` point pairs from each of ``builds``
    independent truncated builds.

    Pairs from one build are correlated, so the standard error comes from the
    spread of the per-build frequencies. Leaves carry the two-point law of the
    full measure, so the expected frequency is 1 - p for every eps and depth.
    """
    if builds < 2 or pairs < 1:
        raise ValueError("need builds >= 2 and pairs >= 1")
    p, eps = to_rational(p), to_rational(eps)
    streams = seed_sequence(seed).spawn(builds)

    def run_build(stream: np.random.SeedSequence) -> int:
        build_seed, sample_seed = stream.spawn(2)
        build = brownian_build(p, eps, depth_max, build_seed)
        return _increasing_pairs(build, pairs, np.random.default_rng(sample_seed))

    hits = np.array(parallel_map(run_build, streams, threads), dtype=np.float64) / pairs
    mean = float(hits.mean())
    stderr = float(hits.std(ddof=1) / np.sqrt(builds))
    logger.info("two-point frequency at p=%s: %.4f +- %.4f over %d builds", p, mean, stderr, builds)
    return MonteCarloEstimate(mean=mean, stderr=stderr, samples=builds * pairs)


# ============================================================================
# GALTON-WATSON OFFSPRING
# ============================================================================


def gw_offspring_batch(r, size: int, rng: np.random.Generator) -> np.ndarray:
    """Z(r) = 1[X0 > r] (1[D1 > r] + 1[D2 > r]) with X0 uniform on (0, D0)."""
    r = float(to_rational(r))
    if r <= 0:
        return np.full(size, 2, dtype=np.int64)
    if r >= 1:
        return np.zeros(size, dtype=np.int64)
    gammas = rng.gamma(0.5, size=(size, 3))
    deltas = gammas / gammas.sum(axis=1, keepdims=True)
    x0 = deltas[:, 0] * rng.random(size)
    alive = (x0 > r).astype(np.int64)
    return alive * ((deltas[:, 1] > r).astype(np.int64) + (deltas[:, 2] > r).astype(np.int64))


def gw_offspring(r, rng: SeedLike) -> int:
    return int(gw_offspring_batch(r, 1, make_rng(rng))[0])


def gw_mean_offspring(r) -> float:
    """
    E[Z(r)] by quadrature.

    With D0 = s the pair (D1, D2) splits 1 - s, and the D1 integral has the
    closed form pi - 2 arcsin(sqrt(r / (1 - s))). The integral over s is done
    numerically and checked against 2 P(D1 > r) from the Beta(1/2, 1) marginal.
    """
    r = float(to_rational(r))
    if r <= 0:
        return 2.0
    if r >= 0.5:
        return 0.0

    def integrand(s: float) -> float:
        inner = np.pi - 2 * np.arcsin(np.sqrt(min(1.0, r / (1 - s))))
        return (1 - r / s) * inner / np.sqrt(s)

    value, error = integrate.quad(integrand, r, 1 - r, limit=200, epsabs=1e-12, epsrel=1e-10)
    logger.debug("E[Z(%g)] quadrature %.10f (error %.2e)", r, value / np.pi, error)
    mean = value / np.pi
    # both children need D_i > r, which bounds the mean by 2 P(D1 > r)
    ceiling = 2 * float(beta_distribution.sf(r, 0.5, 1.0))
    if mean > ceiling + 1e-9:
        raise InternalError("offspring quadrature exceeds its Beta bound", {"r": r, "mean": mean})
    return mean


def gw_offspring_estimate(r, samples: int, seed: SeedLike, threads: Optional[int] = None) -> MonteCarloEstimate:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    chunk = settings.mc_chunk_size
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    generators = spawn_generators(seed, len(sizes))

    def run_chunk(job):
        size, rng = job
        z = gw_offspring_batch(r, size, rng)
        return int(z.sum()), int((z * z).sum())

    totals = parallel_map(run_chunk, list(zip(sizes, generators)), threads)
    first = sum(t[0] for t in totals)
    second = sum(t[1] for t in totals)
    mean = first / samples
    variance = max(0.0, second / samples - mean * mean)
    return MonteCarloEstimate(mean=mean, stderr=float(np.sqrt(variance / samples)), samples=samples)


@dataclass(frozen=True)
class SurvivalEstimate:
    estimate: float
    stderr: float
    trials: int
    survived: int
    capped: int
    generations: int

    def to_dict(self) -> Dict[str, float]:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "trials": self.trials,
            "survived": self.survived,
            "capped": self.capped,
            "generations": self.generations,
        }


def _run_tree(r, generations: int, cap: int, rng: np.random.Generator) -> Tuple[bool, bool]:
    """(alive after `generations`, stopped at the population cap)."""
    population = 1
    for _ in range(generations):
        population = int(gw_offspring_batch(r, population, rng).sum())
        if population == 0:
            return False, False
        if population > cap:
            return True, True
    return True, False


def gw_survival_estimate(
    r, trials: int, generations: int, seed: SeedLike, threads: Optional[int] = None
) -> SurvivalEstimate:
    """Fraction of GW(r) trees alive after ``generations`` levels, one spawned stream per trial."""
    if trials < 1 or generations < 1:
        raise ValueError("trials and generations must be >= 1")
    cap = settings.gw_population_cap
    generators = spawn_generators(seed, trials)
    outcomes = parallel_map(lambda rng: _run_tree(r, generations, cap, rng), generators, threads)
    survived = sum(alive for alive, _ in outcomes)
    capped = sum(hit for _, hit in outcomes)
    if capped:
        logger.warning("%d of %d trees passed the population cap %d and were counted alive", capped, trials, cap)
    estimate = survived / trials
    stderr = float(np.sqrt(estimate * (1 - estimate) / trials))
    logger.info("GW(%s) survival %.4f +- %.4f over %d trials", r, estimate, stderr, trials)
    return SurvivalEstimate(
        estimate=estimate, stderr=stderr, trials=trials, survived=survived, capped=capped, generations=generations
    )
