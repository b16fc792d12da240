"""Monte Carlo checks of the update rule against sampled outcomes.

These simulate a single weak measurement (observed + lost channel) from a
chosen initial state with no decoherence, and average the exact
post-measurement Bloch vectors.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .core import BlochVector, StrengthParams, update_general
from .maps import ConditionalMap
from .rng import SeedPlan
from .runner import run_blocks
from .sampler import sample_label, sample_outcome, split_observed


def measure_once(init: BlochVector, sp_obs: StrengthParams, eta: float,
                 rng: np.random.Generator, n: int):
    """Sample one weak measurement for ``n`` copies of ``init``.

    Returns the observed outcome and the true final state, obtained by
    updating with the observed and then the lost channel at unit efficiency.
    """
    split = split_observed(sp_obs, eta)
    z0 = np.broadcast_to(np.asarray(init.z, dtype=float), (n,))
    label = sample_label(z0, rng)
    obs = sample_outcome(label, split.observed, rng)
    lost = sample_outcome(label, split.lost, rng)
    state = BlochVector(*(np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in init))
    state = update_general(state, obs, split.observed, 1.0)
    if split.s_lost > 0:
        state = update_general(state, lost, split.lost, 1.0)
    return obs, state, split


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    stderr: float
    n: int


def _mean_of(component: str, init: BlochVector, sp_obs: StrengthParams, eta: float,
             n_trials: int, seed: int, stream_base: int, threads: int) -> MeanEstimate:
    def block(b, start, stop):
        rng = SeedPlan(seed, stream_base + b).generator()
        _, st, _ = measure_once(init, sp_obs, eta, rng, stop - start)
        v = getattr(st, component)
        return v.sum(), (v * v).sum()

    s1 = s2 = 0.0
    for a, b in run_blocks(block, n_trials, threads):
        s1 += a
        s2 += b
    m = s1 / n_trials
    var = max(s2 / n_trials - m * m, 0.0)
    return MeanEstimate(m, math.sqrt(var / n_trials), n_trials)


def martingale_mean(z_i: float, sp_obs: StrengthParams, eta: float, n_trials: int,
                    seed: int, stream_base: int = 0, threads: int = 1) -> MeanEstimate:
    """Average final z for initial state ``(sqrt(1 - z_i**2), 0, z_i)``."""
    init = BlochVector(math.sqrt(max(1.0 - z_i * z_i, 0.0)), 0.0, z_i)
    return _mean_of("z", init, sp_obs, eta, n_trials, seed, stream_base, threads)


def dephasing_mean(sp_obs: StrengthParams, eta: float, n_trials: int, seed: int,
                   stream_base: int = 0, threads: int = 1) -> MeanEstimate:
    """Unconditioned mean of ``y`` after measuring a +y qubit."""
    return _mean_of("y", BlochVector(0.0, 1.0, 0.0), sp_obs, eta, n_trials, seed,
                    stream_base, threads)


def lost_channel_map(sp_obs: StrengthParams, eta: float, n_trials: int, seed: int,
                     stream_base: int = 0, bins: int = 201, half_range: float = 6.0,
                     phase_correction: bool = False, threads: int = 1) -> ConditionalMap:
    """Bin exact final Bloch vectors of +y qubits by their observed outcome.

    With ``phase_correction`` each final state is rotated back about z by
    the mean phase of the lost channel, the software correction an
    experimenter could apply when the Q offset is known.
    """

    def block(b, start, stop):
        rng = SeedPlan(seed, stream_base + b).generator()
        obs, st, split = measure_once(BlochVector(0.0, 1.0, 0.0), sp_obs, eta, rng, stop - start)
        x, y = st.x, st.y
        if phase_correction:
            phi = split.qbar_lost * split.s_lost
            c, s = math.cos(phi), math.sin(phi)
            x, y = x * c - y * s, y * c + x * s
        cm = ConditionalMap(bins, half_range)
        cm.add_vectors(obs.i, obs.q, x, y, st.z)
        return cm

    out = ConditionalMap(bins, half_range)
    for cm in run_blocks(block, n_trials, threads):
        out.merge(cm)
    return out
