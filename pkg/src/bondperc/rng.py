"""Seeded random streams.

Every stochastic routine draws from numpy's PCG64 generator seeded through
``SeedSequence``. Replicate ``i`` of a run with seed ``s`` uses the stream
``SeedSequence(s, spawn_key=(i,))``, so replicates are independent of each
other and of how they are scheduled.
"""
import numpy as np


def make_rng(seed, stream=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if stream is None:
        seq = np.random.SeedSequence(int(seed))
    else:
        seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(seq))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from ``rng`` for a derived deterministic stream."""
    return int(rng.integers(0, 2**63 - 1))


def replicate_seed(seed: int, i: int) -> int:
    """Integer seed for replicate ``i``, derived from stream ``(seed, i)``."""
    state = np.random.SeedSequence(int(seed), spawn_key=(int(i),)).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])
