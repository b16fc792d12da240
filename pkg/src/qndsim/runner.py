"""Deterministic parallel execution over fixed trial blocks.

Work is cut into blocks of :data:`~qndsim.rng.BLOCK_SIZE` trials.  Block ``b``
always draws from stream ``stream_base + b`` and results are reduced in block
order, so outputs do not depend on the number of worker threads.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

from .core import AmpParams, QubitParams, StrengthParams
from .maps import ConditionalMap
from .rng import BLOCK_SIZE, SeedPlan, blocks
from .tomography import Timing, Trials, bin_conditional, post_select, run_protocol


def run_blocks(fn, n_trials: int, threads: int = 1, block_size: int = BLOCK_SIZE):
    """Yield ``fn(block, start, stop)`` for every block, in block order.

    At most ``2*threads`` blocks are in flight, which bounds memory.
    """
    work = list(blocks(n_trials, block_size))
    if threads <= 1:
        for b, a, z in work:
            yield fn(b, a, z)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending = deque()
        it = iter(work)
        for item in it:
            pending.append(pool.submit(fn, *item))
            if len(pending) >= 2 * threads:
                break
        while pending:
            yield pending.popleft().result()
            nxt = next(it, None)
            if nxt is not None:
                pending.append(pool.submit(fn, *nxt))


@dataclass
class BackactionResult:
    cmap: ConditionalMap
    n_trials: int
    n_retained: int = 0
    y_count: int = 0
    y_sum: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def retention(self) -> float:
        return self.n_retained / self.n_trials if self.n_trials else math.nan

    @property
    def y_mean(self) -> float:
        return self.y_sum / self.y_count if self.y_count else math.nan

    @property
    def y_stderr(self) -> float:
        if not self.y_count:
            return math.nan
        m = self.y_mean
        return math.sqrt(max(1.0 - m * m, 0.0) / self.y_count)


def simulate_backaction(sp_weak: StrengthParams, sp_strong: StrengthParams, qp: QubitParams,
                        amp: AmpParams, n_trials: int, seed: int, stream_base: int = 0,
                        timing: Timing = Timing(), bins: int = 201, half_range: float = 6.0,
                        threshold: float = 1.5, threads: int = 1) -> BackactionResult:
    """Run the full protocol, post-select and accumulate conditional maps."""

    def block(b, start, stop):
        tr = run_protocol(sp_weak, sp_strong, qp, amp, stop - start,
                          SeedPlan(seed, stream_base + b), timing, first_trial=start)
        kept = _quiet_post_select(tr, threshold)
        cm = bin_conditional(kept, bins, half_range)
        sel = kept.axis == 1
        return cm, len(kept), int(sel.sum()), float(kept.eigenvalue[sel].sum())

    res = BackactionResult(ConditionalMap(bins, half_range), n_trials)
    for cm, kept, yc, ys in run_blocks(block, n_trials, threads):
        res.cmap.merge(cm)
        res.n_retained += kept
        res.y_count += yc
        res.y_sum += ys
    return res


def _quiet_post_select(trials: Trials, threshold: float) -> Trials:
    # per-block retention warnings are noise; callers check the total
    return post_select(trials, threshold, warn_below=0.0)

