"""Deterministic RNG streams keyed by purpose tuples.

Every random draw in the package comes from a generator built here, keyed
by (master_seed, stream, *indices). Results are therefore independent of
scheduling: any trial or brood can be recomputed in isolation, and resumed
or parallel runs reproduce serial ones exactly.
"""

from __future__ import annotations

import numpy as np

STREAM_INIT = 0
STREAM_REPRO = 1
STREAM_TRIAL = 2
STREAM_DEMO = 3
STREAM_BATTERY = 4


def rng_for(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))
