"""Counter-based random streams keyed by (seed, purpose, replication).

Every Monte Carlo replication draws from its own Philox stream, so results
do not depend on how replications are batched or spread over workers.
"""

import zlib

import numpy as np

MASK_64 = 0xFFFFFFFFFFFFFFFF


def tag_key(tag):
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed, tag="default", index=0):
    """Return a ``numpy.random.Generator`` for one (seed, tag, index) key."""
    if seed is None:
        raise ValueError("an explicit seed is required")
    seed = int(seed) & MASK_64
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag_key(tag), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def standard_normals(seed, tag, start, count, size):
    """Stack ``count`` rows of ``size`` standard normals, row j from stream j."""
    out = np.empty((count, size))
    for k in range(count):
        out[k] = stream(seed, tag, start + k).standard_normal(size)
    return out
