"""Deterministic random substreams.

Every stochastic quantity draws from a generator keyed by ``(seed, *key)``.
Work is split into fixed-size blocks whose keys depend only on block index,
never on how many workers process them, so results are reproducible
bit-for-bit at any degree of parallelism.
"""

from __future__ import annotations

import numpy as np

BLOCK_SIZE = 1 << 16


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def block_sizes(total: int, block: int = BLOCK_SIZE):
    """Yield ``(index, size)`` for consecutive blocks covering ``total`` items."""
    if total < 0:
        raise ValueError("total must be non-negative")
    i = 0
    start = 0
    while start < total:
        size = min(block, total - start)
        yield i, size
        i += 1
        start += size
