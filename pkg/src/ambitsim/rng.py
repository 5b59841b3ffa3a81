"""Deterministic RNG substream derivation for replicate-parallel Monte Carlo.

Every replicate draws from its own generator derived from
``(master_seed, replicate_index)``.  The derivation is index based, so results
do not depend on batching or execution order.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int) -> np.random.Generator:
    """Generator for single-stream (non-replicated) work."""
    return np.random.default_rng(np.random.SeedSequence(master_seed))


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` under ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, index)))


def substreams(master_seed: int, n: int, start: int = 0):
    """Iterate over the generators of replicates ``start .. start+n-1``."""
    for i in range(start, start + n):
        yield substream(master_seed, i)
