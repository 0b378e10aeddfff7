"""Counter-based seed derivation for reproducible (and parallel-safe) replicas."""

from __future__ import annotations

import numpy as np


def spawn_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Return a generator derived from ``master_seed`` and an integer key path.

    The same (seed, key) pair always yields the same stream, independent of
    the order in which replicas run or which worker runs them.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


def replica_rng(master_seed: int, index: int) -> np.random.Generator:
    """Generator for replica ``index`` under ``master_seed``."""
    return spawn_rng(master_seed, index)
