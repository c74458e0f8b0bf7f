"""Counter-based random streams.

Every stream is a Philox generator keyed by a tuple of integers, so the
numbers a replica block sees depend only on ``(seed, *keys)`` and never on
which worker runs it or in what order.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    words = [int(seed) & MASK64, *(int(k) & MASK64 for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(int(rng))
