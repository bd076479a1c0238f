"""Deterministic random-stream derivation.

Every source of randomness in a run derives from one root seed through
named streams, so a run is reproducible from a single integer:

    stream 0  weight initialization
    stream 1  per-epoch shuffling           (extra key: epoch)
    stream 2  per-step dropout masks        (extra keys: epoch, step)
    stream 3  Monte-Carlo paths
"""

import numpy as np

STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_DROPOUT = 2
STREAM_MC = 3


def derive_rng(root_seed: int, stream: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), int(stream), *map(int, extra)]))
