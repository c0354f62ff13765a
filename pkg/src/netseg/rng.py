"""Seeded random-number utilities.

Every stochastic operation in this package takes an explicit seed (or an
already-constructed ``numpy.random.Generator``), so runs are bit-reproducible.
Generators are backed by Philox, a counter-based bit generator: independent
streams are derived either by spawning a ``SeedSequence`` (replicate sweeps)
or by fixing distinct counter blocks (per-arrival streams in the growth
simulator, which keeps paired runs aligned).
"""

from __future__ import annotations

import numpy as np

Seed = "int | np.random.Generator | np.random.SeedSequence"


def make_rng(seed) -> np.random.Generator:
    """Return a Philox-backed generator for ``seed``; pass generators through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def split_rngs(seed, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent generator streams from one seed."""
    if isinstance(seed, np.random.Generator):
        # Split off the generator's own state rather than the original seed.
        children = np.random.SeedSequence(seed.integers(0, 2**63)).spawn(n)
    else:
        if not isinstance(seed, np.random.SeedSequence):
            seed = np.random.SeedSequence(seed)
        children = seed.spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def philox_key(seed) -> np.ndarray:
    """Derive a 128-bit Philox key from a seed (two uint64 words)."""
    if isinstance(seed, np.random.Generator):
        return seed.integers(0, 2**64, size=2, dtype=np.uint64)
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.generate_state(2, np.uint64)


def counter_rng(key: np.ndarray, index: int, tag: int = 0) -> np.random.Generator:
    """Generator for stream ``(tag, index)`` under a fixed Philox key.

    Distinct ``(tag, index)`` pairs give independent streams regardless of how
    much randomness each one consumes, which is what keeps paired simulations
    aligned arrival-by-arrival.
    """
    counter = np.array([0, 0, tag, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def randomized_round(x: float, rng: np.random.Generator) -> int:
    """Round ``x`` to an adjacent integer with expectation exactly ``x``.

    Consumes a draw only when ``x`` is fractional, so integer inputs leave the
    stream untouched (paired runs rely on this).
    """
    lo = int(np.floor(x))
    frac = x - lo
    if frac == 0.0:
        return lo
    return lo + (1 if rng.random() < frac else 0)
