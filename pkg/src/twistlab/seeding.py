"""Deterministic stream splitting: all randomness flows from one seed.

Every Monte Carlo component draws from its own named stream.  Streams are
counter-based (Philox) and keyed by ``SeedSequence(entropy=seed,
spawn_key=path)``, so replicas are independent, reproducible and safe to
evaluate in parallel.  String path components are hashed with crc32 to a
stable 32-bit key.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["rng_stream"]


def rng_stream(seed: int, *path: int | str) -> np.random.Generator:
    """Generator for the stream named by ``path`` under a master ``seed``."""
    key = tuple(
        zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in path
    )
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
