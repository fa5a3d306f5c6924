"""Counter-keyed random streams.

Every sampling site derives its own Philox stream from (seed, role, keys),
so worker w / thread h / pass c draws the same numbers no matter how the
runtime schedules it, and a straight-line reference loop can reproduce an
engine trajectory by constructing the identical streams.
"""
from __future__ import annotations

import numpy as np

# role tags keep unrelated sampling sites out of each other's streams
ROLE_SAMPLE = 1   # component index draws in local SGD steps
ROLE_DELAY = 2    # injected transit latencies
ROLE_INIT = 3     # model / problem initialisation
ROLE_ENV = 4      # environment and action sampling


def substream(seed: int, role: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFF, int(role)] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def draw_indices(rng: np.random.Generator, n: int, size: int = 1):
    """Uniform component indices; an int for size 1, else an array."""
    if size == 1:
        return int(rng.integers(0, n))
    return rng.integers(0, n, size=size)
