"""Deterministic counter-based random streams.

Streams are keyed by ``(seed, *path)`` through ``SeedSequence`` spawn keys on
top of the Philox counter-based generator, so any worker can regenerate its
own stream without coordination and results do not depend on scheduling
order or thread count.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Philox generator for the ``(seed, *path)`` stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *path: int) -> int:
    """Derive an integer seed for a nested component from ``(seed, *path)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
