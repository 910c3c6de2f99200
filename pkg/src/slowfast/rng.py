"""Seeding helpers.

Every Monte Carlo entry point accepts either an integer seed or a ready
``numpy.random.Generator``.  Replica blocks are derived from the master seed
and a block index, so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import numpy as np

#: Replicas are simulated in fixed-size blocks; each block owns an
#: independent generator derived from (master seed, block index).  The block
#: size is part of the determinism contract and must not depend on the
#: worker count.
BLOCK_SIZE = 8192


def as_generator(rng) -> np.random.Generator:
    """Coerce an int seed or a Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("an explicit seed or Generator is required")
    return np.random.default_rng(int(rng))


def master_seed(rng) -> int:
    """Extract a reproducible integer master seed.

    Integer seeds pass through; a Generator contributes one draw from its
    stream (recorded by the caller for provenance).
    """
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


def block_generator(seed: int, block_index: int, stream: int = 0) -> np.random.Generator:
    """Generator for one replica block, independent of all other blocks."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(block_index)))
    )


def block_ranges(n_replicas: int, block_size: int = BLOCK_SIZE):
    """Yield (block_index, start, stop) covering range(n_replicas)."""
    start = 0
    index = 0
    while start < n_replicas:
        stop = min(start + block_size, n_replicas)
        yield index, start, stop
        index += 1
        start = stop
