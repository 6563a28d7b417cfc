"""
Seeded random streams.

Every randomized operation takes an explicit seed (or a numpy Generator) and
derives child streams with ``SeedSequence.spawn`` so parallel chunks and
recursive constructions are reproducible bit-for-bit.
"""

from typing import List, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

# sampled reals are quantized to k / 2**32
QUANTUM_BITS = 32
QUANTUM = 2**QUANTUM_BITS


def seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(0, 2**63)))
    return np.random.SeedSequence(seed)


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed_sequence(seed))


def spawn_generators(seed: SeedLike, count: int) -> List[np.random.Generator]:
    return [np.random.default_rng(child) for child in seed_sequence(seed).spawn(count)]


def draw_quanta(rng: np.random.Generator, size: int) -> np.ndarray:
    """Integers k in [0, 2**32); the sampled real is k / 2**32."""
    return rng.integers(0, QUANTUM, size=size, dtype=np.int64)
