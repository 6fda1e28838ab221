"""Deterministic seed derivation.

Every random draw in the package flows from a caller-supplied 64-bit
master seed through ``numpy.random.SeedSequence`` keyed on a stream
constant plus indices, so distinct subsystems never share a stream and
any run can be replayed exactly.
"""

from __future__ import annotations

import numpy as np

TREE_STREAM = 1
RUN_STREAM = 2
FOREST_STREAM = 3
BAGGING_STREAM = 4
IMPORTANCE_STREAM = 5
SIMULATE_STREAM = 6


def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((int(master_seed), *(int(k) for k in key)))


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master_seed, *key))


def derive_seed(master_seed: int, *key: int) -> int:
    """A 64-bit child seed, itself usable as a master seed."""
    return int(seed_sequence(master_seed, *key).generate_state(1, np.uint64)[0])
