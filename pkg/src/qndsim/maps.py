"""Binned accumulators over the plane of scaled outcomes ``(i, q)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AXES = ("X", "Y", "Z")
AXIS_INDEX = {a: k for k, a in enumerate(AXES)}


@dataclass
class ConditionalMap:
    """Per-bin counts and sums for the three Bloch components.

    Arrays are indexed ``[channel, i_bin, q_bin]``.  ``hist`` counts every
    added outcome that landed inside the grid; ``overflow`` counts the rest,
    so ``hist.sum() + overflow`` is the number of outcomes added.  Sums of
    +/-1 eigenvalues are exact in float64, so merging is order-independent
    for tomography data.
    """

    bins: int = 201
    half_range: float = 6.0

    def __post_init__(self):
        if self.bins < 1 or not self.half_range > 0:
            raise ValueError("need bins >= 1 and half_range > 0")
        shape = (3, self.bins, self.bins)
        self.counts = np.zeros(shape, dtype=np.int64)
        self.sums = np.zeros(shape)
        self.sumsq = np.zeros(shape)
        self.hist = np.zeros(shape[1:], dtype=np.int64)
        self.overflow = 0

    @property
    def width(self) -> float:
        return 2.0 * self.half_range / self.bins

    @property
    def centers(self) -> np.ndarray:
        return -self.half_range + (np.arange(self.bins) + 0.5) * self.width

    @property
    def n_total(self) -> int:
        return int(self.hist.sum()) + self.overflow

    def _index(self, i, q):
        ii = np.floor((np.asarray(i) + self.half_range) / self.width).astype(np.int64)
        iq = np.floor((np.asarray(q) + self.half_range) / self.width).astype(np.int64)
        ok = (ii >= 0) & (ii < self.bins) & (iq >= 0) & (iq < self.bins)
        return ii * self.bins + iq, ok

    def _acc(self, ch_flat, flat, values):
        size = 3 * self.bins * self.bins
        idx = ch_flat * self.bins * self.bins + flat
        self.counts += np.bincount(idx, minlength=size).reshape(self.counts.shape)
        self.sums += np.bincount(idx, weights=values, minlength=size).reshape(self.sums.shape)
        self.sumsq += np.bincount(idx, weights=values * values, minlength=size).reshape(self.sums.shape)

    def add_tomography(self, i, q, axis, eigenvalue) -> None:
        """One tomography result per outcome; ``axis`` holds 0/1/2 for X/Y/Z."""
        flat, ok = self._index(i, q)
        self.overflow += int(ok.size - np.count_nonzero(ok))
        flat = flat[ok]
        self.hist += np.bincount(flat, minlength=self.bins ** 2).reshape(self.hist.shape)
        self._acc(np.asarray(axis, dtype=np.int64)[ok], flat,
                  np.asarray(eigenvalue, dtype=float)[ok])

    def add_vectors(self, i, q, x, y, z) -> None:
        """Exact Bloch components per outcome; each feeds all three channels."""
        flat, ok = self._index(i, q)
        self.overflow += int(ok.size - np.count_nonzero(ok))
        flat = flat[ok]
        self.hist += np.bincount(flat, minlength=self.bins ** 2).reshape(self.hist.shape)
        n = flat.size
        self._acc(np.repeat(np.arange(3), n), np.tile(flat, 3),
                  np.concatenate([np.asarray(v, dtype=float)[ok] for v in (x, y, z)]))

    def merge(self, other: "ConditionalMap") -> "ConditionalMap":
        if (other.bins, other.half_range) != (self.bins, self.half_range):
            raise ValueError("cannot merge maps with different grids")
        self.counts += other.counts
        self.sums += other.sums
        self.sumsq += other.sumsq
        self.hist += other.hist
        self.overflow += other.overflow
        return self

    def means(self) -> np.ndarray:
        """Per-bin conditional means, NaN where a bin is empty."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.sums / self.counts, np.nan)

    def variances(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            m = self.sums / self.counts
            v = self.sumsq / self.counts - m * m
        return np.where(self.counts > 0, np.clip(v, 0.0, None), np.nan)

    def standard_errors(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.sqrt(self.variances() / self.counts)

    def empty(self) -> np.ndarray:
        return self.counts == 0

    def channel_total(self, axis: str) -> tuple[int, float]:
        """Count and sum over every bin of one channel."""
        k = AXIS_INDEX[axis]
        return int(self.counts[k].sum()), float(self.sums[k].sum())
