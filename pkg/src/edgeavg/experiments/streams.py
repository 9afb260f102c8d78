"""Seeded random streams, one family per (seed, replica)."""

from __future__ import annotations

import numpy as np


def _seed_sequence(seed: int, replica: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(replica),))


def split_stream(seed: int, replica: int) -> np.random.Generator:
    """The random stream of ``replica`` under ``seed``; independent across replicas."""
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, replica)))


def replica_streams(seed: int, replica: int, count: int) -> list[np.random.Generator]:
    """``count`` independent child streams of the (seed, replica) stream.

    Experiments use separate children for the initial profile, the forward
    clocks, the fragmentation clocks and the duality opinions, so those are
    independent by construction.
    """
    children = _seed_sequence(seed, replica).spawn(count)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]
