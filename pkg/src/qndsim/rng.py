"""Counter-based random streams keyed by ``(master_seed, stream_id)``.

Each stream is a Philox generator whose 128-bit key packs the master seed
(low word) and the stream id (high word).  No generator state is shared, so a
stream produces the same numbers whichever worker evaluates it and in
whatever order.

Trials are grouped into fixed-size blocks of :data:`BLOCK_SIZE`; block ``b``
of a run draws from stream ``stream_base + b``.  The block size is part of the
reproducibility contract: changing it changes the numbers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLOCK_SIZE = 1 << 15
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedPlan:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= v <= _MASK64):
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        key = (self.stream_id << 64) | self.master_seed
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, offset: int) -> "SeedPlan":
        return SeedPlan(self.master_seed, (self.stream_id + offset) & _MASK64)


def sub_stream(base: int, index: int, width: int = 32) -> int:
    """Stream id for sub-run ``index`` under ``base``; reserves ``2**width`` blocks each."""
    return (base + (index << width)) & _MASK64


def blocks(n_trials: int, block_size: int = BLOCK_SIZE):
    """Yield ``(block_index, start, stop)`` covering ``range(n_trials)``."""
    for b, start in enumerate(range(0, n_trials, block_size)):
        yield b, start, min(start + block_size, n_trials)
