"""Deterministic RNG derivation for reproducible, parallel replicates.

All randomness flows from one master seed.  Replicate k uses the
generator derived from the entropy pair (seed, k), so results are
identical regardless of how replicates are scheduled across workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_SEED = 0xC0FFEE


def derive_rng(seed: int, *indices: int) -> np.random.Generator:
    """Generator seeded from (seed, index, ...)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(i) for i in indices)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def spawn(rng, n: int):
    """n independent child generators (stub rngs may implement .spawn)."""
    return rng.spawn(n)


def run_replicates(fn, replicates: int, seed: int, threads: int = 1) -> list:
    """Evaluate fn(rep_index, rng) for each replicate with per-replicate
    sub-seeded generators.  Output order (and content) is independent of
    the thread count.
    """
    def job(rep):
        return fn(rep, derive_rng(seed, rep))

    if threads <= 1:
        return [job(rep) for rep in range(replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(replicates)))
