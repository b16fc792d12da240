"""Outcome sampling, the observed/lost channel split and qubit telegraph paths."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .core import Outcome, QubitParams, StrengthParams, steps_per_window


@dataclass(frozen=True)
class ChannelSplit:
    s_obs: float
    s_lost: float
    qbar_obs: float
    qbar_lost: float

    @property
    def observed(self) -> StrengthParams:
        return StrengthParams(self.s_obs, self.qbar_obs)

    @property
    def lost(self) -> StrengthParams:
        return StrengthParams(self.s_lost, self.qbar_lost)


def split_strength(s_total: float, qbar_total: float, eta: float) -> ChannelSplit:
    """Divide one measurement into an observed fraction ``eta`` and a lost remainder.

    Strength adds in quadrature, so ``s_obs**2 + s_lost**2 == s_total**2``.
    """
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must be in (0, 1], got {eta!r}")
    a, b = math.sqrt(eta), math.sqrt(1.0 - eta)
    return ChannelSplit(a * s_total, b * s_total, a * qbar_total, b * qbar_total)


def split_observed(sp_obs: StrengthParams, eta: float) -> ChannelSplit:
    """Split given the *observed* strength, as quoted on measured histograms."""
    a = math.sqrt(eta)
    return split_strength(sp_obs.s / a, sp_obs.qbar / a, eta)


def sample_label(z, rng: np.random.Generator):
    """Return +1 with probability ``(1 + z)/2``, else -1."""
    z = np.asarray(z, dtype=float)
    u = rng.random(z.shape)
    lab = np.where(u < 0.5 * (1.0 + z), 1, -1).astype(np.int8)
    return lab if lab.ndim else int(lab)


def sample_outcome(label, sp: StrengthParams, rng: np.random.Generator) -> Outcome:
    label = np.asarray(label)
    i = label * sp.s + rng.standard_normal(label.shape)
    q = sp.qbar + rng.standard_normal(label.shape)
    if label.ndim == 0:
        return Outcome(float(i), float(q))
    return Outcome(i, q)


@dataclass(frozen=True)
class LabelPath:
    """Piecewise-constant +/-1 labels sampled every ``dt``; last axis is time."""

    labels: np.ndarray
    dt: float

    @property
    def duration(self) -> float:
        return self.labels.shape[-1] * self.dt

    @property
    def final(self):
        return self.labels[..., -1]


def flip_probabilities(qp: QubitParams, dt: float) -> tuple[float, float]:
    """Per-step (up, down) transition probabilities ``1 - exp(-rate*dt)``."""
    return -math.expm1(-qp.rate_up * dt), -math.expm1(-qp.rate_down * dt)


def sample_telegraph(qp: QubitParams, initial, duration: float, dt: float,
                     rng: np.random.Generator) -> LabelPath:
    """Two-state Markov chain with rates ``p_eq/t1`` (up) and ``(1-p_eq)/t1`` (down).

    Each step flips the label with probability ``1 - exp(-rate*dt)``.  Instead
    of drawing one uniform per step, the number of steps until the next flip is
    drawn from the matching geometric law, which is the same chain.
    ``initial`` may be a scalar label or an array of labels (one path each).
    """
    if dt >= qp.t1 / 10.0:
        raise ValueError(f"dt={dt!r} too coarse for t1={qp.t1!r}; need dt < t1/10")
    n = steps_per_window(duration, dt)
    init = np.asarray(initial, dtype=np.int8)
    if not np.all(np.abs(init) == 1):
        raise ValueError("telegraph labels must be +1 or -1")
    p_up, p_down = flip_probabilities(qp, dt)
    flat = init.reshape(-1)
    m = flat.size
    flips = np.zeros((m, n + 1), dtype=np.int8)
    rows = np.arange(m)
    pos = np.zeros(m, dtype=np.int64)
    cur = flat.copy()
    while rows.size:
        p = np.where(cur[rows] > 0, p_down, p_up)
        live = p > 0
        rows, pos_r, p = rows[live], pos[rows][live], p[live]
        if not rows.size:
            break
        nxt = pos_r + rng.geometric(p)
        inside = nxt < n
        rows, nxt = rows[inside], nxt[inside]
        flips[rows, nxt] = 1
        pos[rows] = nxt
        cur[rows] = -cur[rows]
    parity = np.cumsum(flips[:, :n], axis=1, dtype=np.int64) & 1
    labels = (flat[:, None] * (1 - 2 * parity)).astype(np.int8)
    return LabelPath(labels.reshape(init.shape + (n,)), dt)


def cavity_response(labels: np.ndarray, dt: float, rate: float) -> np.ndarray:
    """One-pole low-pass of the label sequence (field amplitude decay ``rate``).

    Starts in steady state with the first label.
    """
    a = -math.expm1(-rate * dt)
    out = np.empty(labels.shape, dtype=float)
    y = labels[..., 0].astype(float)
    for k in range(labels.shape[-1]):
        y = y + a * (labels[..., k] - y)
        out[..., k] = y
    return out


def integrated_outcome(path: LabelPath, sp: StrengthParams, rng: np.random.Generator,
                       cavity_rate: float | None = None) -> Outcome:
    """Outcome of a readout window whose qubit label follows ``path``.

    The I mean is ``s`` times the time-averaged label; Q is unaffected.
    ``cavity_rate`` enables the optional cavity transient (off by default).
    """
    lab = path.labels
    if cavity_rate is not None:
        mean_label = cavity_response(lab, path.dt, cavity_rate).mean(axis=-1)
    else:
        mean_label = lab.mean(axis=-1, dtype=float)
    shape = mean_label.shape
    i = sp.s * mean_label + rng.standard_normal(shape)
    q = sp.qbar + rng.standard_normal(shape)
    if np.ndim(i) == 0:
        return Outcome(float(i), float(q))
    return Outcome(i, q)

