"""Deterministic, schedule-independent random streams.

All randomness flows through Philox, a counter-based generator: every
consumer derives its own 64-bit stream seed from the master seed plus a
fixed tuple of integers (pair index, sequence index, attempt, role tag).
Because streams never share state, results are identical no matter how
many workers run or in which order sequences are generated.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

# Role tags keep sibling draws (scene vs. start pose vs. balancing) apart.
ROLE_SCENE = 0x53
ROLE_START = 0x5A
ROLE_EPOCH = 0x45


def _splitmix64(x: int) -> int:
    # Finalizer from the splitmix64 generator; good 64-bit avalanche.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Fold a tuple of stream-path integers into a child seed.

    derive_seed(m, a, b) != derive_seed(m, b, a) for a != b, and children
    of distinct masters never collide in practice (64-bit mixing).
    """
    h = _splitmix64(master & _MASK64)
    for p in path:
        h = _splitmix64(h ^ ((p & _MASK64) + 0xA0761D6478BD642F))
    return h


def generator(seed: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed (counter starts at zero)."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
