"""Splittable seeding helpers.

All randomness derives from one non-negative master seed through
`numpy.random.SeedSequence` spawn keys, so any unit of work (a subsample, a
benchmark repeat, a simulation stage) owns an independent stream that never
depends on execution order or worker scheduling.
"""

from __future__ import annotations

import numpy as np

from ._validation import check_seed


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the work unit addressed by `key`."""
    master_seed = check_seed(master_seed)
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.default_rng(seq)


def derived_seed(master_seed: int, *key: int) -> int:
    """Collapse a spawn key to a plain integer seed for a child config."""
    master_seed = check_seed(master_seed)
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return int(seq.generate_state(1, np.uint64)[0])
