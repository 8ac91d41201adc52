"""Named, reproducible random streams.

Every source of randomness in a mission is drawn from a stream keyed by the
manifest seeds plus a stream name, so adding draws to one stream never shifts
another.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("world", "sensor", "filter", "planner", "generator")


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(name: str, *seeds: int) -> np.random.Generator:
    """Return an independent generator for ``name`` under the given seeds."""
    entropy = [int(s) for s in seeds] + [_name_key(name)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def child_seeds(rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` 63-bit seeds for per-task child generators."""
    return rng.integers(0, 2**63 - 1, size=n, dtype=np.int64)


def from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))
