"""Deterministic RNG derivation.

Every randomized routine in the package takes an integer seed and derives
independent streams from (seed, context...) tuples, so results are
reproducible and independent of scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 63) - 1


def derive_rng(seed: int, *context: int) -> np.random.Generator:
    """Generator seeded from (seed, *context), stable across runs."""
    entropy = [int(seed) & _MASK] + [int(c) & _MASK for c in context]
    return np.random.default_rng(np.random.SeedSequence(entropy))
