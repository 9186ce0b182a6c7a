"""Named, counter-based random streams derived from one integer seed."""

import zlib

import numpy as np


def stream(seed: int, *names) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and a tuple of stream names.

    Streams with different names are independent; the same (seed, names)
    always yields the same sequence, whatever else the program has drawn.
    """
    key = [zlib.crc32(str(n).encode()) for n in names]
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
