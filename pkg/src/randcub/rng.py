"""Seed handling.

Every random stream is a Philox (counter-based, period 2**256) generator keyed
by a numpy ``SeedSequence``. Derived streams use

    mix(seed, *keys) = SeedSequence(seed, spawn_key=keys).generate_state(1, uint64)[0]

which is a fixed hash (numpy's SeedSequence mixing), so a master seed and a
trial index map to the same 64-bit stream seed on every machine.
"""

import numpy as np


def mix(seed: int, *keys: int) -> int:
    """Derive a 64-bit stream seed from a master seed and integer keys."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
