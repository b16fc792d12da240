"""Continuous readout records: synthesis, binomial smoothing, jump detection, T1.

Records are stored batch-first: ``samples`` is ``(n_records, n_samples)`` or a
single 1-D trace.  Ground truth labels ride along for validation only; the
detectors never look at them.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb
import json
import math
import struct

import numpy as np

from .core import QubitParams, StrengthParams, steps_per_window
from .estimators import FitError, exponential_fit
from .io import atomic_open
from .rng import SeedPlan
from .sampler import sample_label, sample_telegraph


@dataclass(frozen=True)
class Record:
    samples: np.ndarray
    dt: float
    truth: np.ndarray | None = None
    seed: int = 0
    stream_ids: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.samples.shape[-1]

    @property
    def duration(self) -> float:
        return self.n_samples * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def __len__(self):
        return 1 if self.samples.ndim == 1 else self.samples.shape[0]


def instantaneous_strength(s: float, t_m: float, dt: float) -> float:
    """Per-sample signal so that a ``t_m`` boxcar average has strength ``s``."""
    return s / math.sqrt(steps_per_window(t_m, dt))


def generate_records(sp: StrengthParams, qp: QubitParams, n_records: int, duration: float,
                     dt: float, t_m: float, seeds: SeedPlan, initial_z: float | None = None
                     ) -> Record:
    """Synthesize ``n_records`` raw traces; record ``k`` uses stream ``seeds.stream_id + k``.

    The qubit starts with ``z = initial_z`` (thermal equilibrium when None).
    Each sample is ``s_inst*label + N(0, 1)``.
    """
    n = steps_per_window(duration, dt)
    s_inst = instantaneous_strength(sp.s, t_m, dt)
    z0 = qp.z_eq if initial_z is None else initial_z
    samples = np.empty((n_records, n))
    truth = np.empty((n_records, n), dtype=np.int8)
    streams = np.array([seeds.child(k).stream_id for k in range(n_records)], dtype=np.uint64)
    for k in range(n_records):
        rng = seeds.child(k).generator()
        lab = sample_telegraph(qp, sample_label(z0, rng), duration, dt, rng).labels
        truth[k] = lab
        samples[k] = s_inst * lab + rng.standard_normal(n)
    return Record(samples, dt, truth, seeds.master_seed, streams)


def generate_record(sp: StrengthParams, qp: QubitParams, duration: float, dt: float,
                    seeds: SeedPlan, t_m: float = 240e-9, initial_z: float | None = None
                    ) -> Record:
    r = generate_records(sp, qp, 1, duration, dt, t_m, seeds, initial_z)
    return replace(r, samples=r.samples[0], truth=r.truth[0])


def binomial_taps(n: int) -> np.ndarray:
    return np.array([comb(n, k) for k in range(n + 1)], dtype=float) / 2.0 ** n


def filter_noise_gain(width: float, dt: float) -> float:
    """Standard deviation of unit white noise after the interior binomial filter."""
    c = binomial_taps(_filter_order(width, dt))
    return float(np.sqrt(np.sum(c * c)))


def _filter_order(width: float, dt: float) -> int:
    if width < dt:
        raise ValueError(f"filter width {width!r} is shorter than the sample period {dt!r}")
    n = steps_per_window(width, dt)
    if n % 2:
        raise ValueError(f"filter width/dt must be even (odd tap count), got {n}")
    return n


def binomial_filter(r: Record, width: float, scale_to_sigma: bool = True,
                    noise_std: float = 1.0) -> Record:
    """Smooth with normalized binomial taps ``C(n, k)/2**n``, ``n = width/dt``.

    Near the ends the window shrinks symmetrically (order ``2h`` with ``h`` the
    distance to the nearer end).  With ``scale_to_sigma`` every output sample is
    divided by ``noise_std`` times the noise gain of its own window, so filtered
    noise has unit width everywhere; without it the filter has unit DC gain.
    """
    n = _filter_order(width, r.dt)
    x = np.atleast_2d(r.samples).astype(float)
    m = x.shape[-1]
    half = n // 2
    out = np.empty_like(x)
    gain = np.full(m, np.sqrt(np.sum(binomial_taps(n) ** 2)))
    for k in range(min(half, m)):
        for idx in {k, m - 1 - k}:
            h = min(idx, m - 1 - idx, half)
            taps = binomial_taps(2 * h)
            out[:, idx] = x[:, idx - h: idx + h + 1] @ taps
            gain[idx] = np.sqrt(np.sum(taps * taps))
    if m > 2 * half:
        c = binomial_taps(n)
        acc = np.zeros((x.shape[0], m - 2 * half))
        for j, cj in enumerate(c):
            acc += cj * x[:, j: j + m - 2 * half]
        out[:, half: m - half] = acc
    if scale_to_sigma:
        out /= noise_std * gain
    if r.samples.ndim == 1:
        out = out[0]
    return replace(r, samples=out)


def filtered_center(s: float, t_m: float, dt: float, width: float) -> float:
    """Position of the state centers, in filtered sigma units, for records from
    :func:`generate_records` passed through ``binomial_filter(scale_to_sigma=True)``."""
    return instantaneous_strength(s, t_m, dt) / filter_noise_gain(width, dt)


@dataclass(frozen=True)
class JumpReport:
    """Detected jumps of one record.

    ``states`` holds the detector's label for every sample; ``segments`` lists
    ``(label, duration)`` pairs in time order.
    """

    times: np.ndarray
    directions: np.ndarray
    states: np.ndarray
    dt: float
    segments: list = field(default_factory=list)

    @property
    def duration(self) -> float:
        return self.states.size * self.dt

    @property
    def dwell_excited(self) -> float:
        return float(np.count_nonzero(self.states > 0)) * self.dt

    @property
    def dwell_ground(self) -> float:
        return float(np.count_nonzero(self.states < 0)) * self.dt

    @property
    def n_down(self) -> int:
        return int(np.count_nonzero(self.directions < 0))

    @property
    def n_up(self) -> int:
        return int(np.count_nonzero(self.directions > 0))


def detector_states(x: np.ndarray, s: float, threshold: float = 4.0,
                    settle: int = 0) -> np.ndarray:
    """Hysteretic two-state labels for filtered samples ``x`` (last axis time).

    From the current center a sample at least ``threshold`` away toward the
    other center triggers a switch, provided the other center is now the
    nearer one.  The initial state is set by the first trusted sample that is
    decisive under the same rule (at least ``threshold`` from one center toward
    the other); earlier samples share it.  ``settle`` samples at each end
    (where a shrinking filter window leaves extra noise) are not trusted: they
    never trigger and take the state of their neighbours.
    """
    if not s > 0:
        raise ValueError("detector needs s > 0: the state centers coincide")
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    x = np.atleast_2d(x)
    m = x.shape[1]
    settle = min(max(int(settle), 0), (m - 1) // 2)
    level = max(threshold - s, 0.0)
    if level > 0:
        up, down = x >= level, x <= -level
    else:
        up, down = x > 0, x <= 0
    marks = np.where(up, 1, np.where(down, -1, 0)).astype(np.int8)
    marks[:, :settle] = 0
    if settle:
        marks[:, m - settle:] = 0
    # initial state: the first decisive sample, else the nearer center of the
    # mean of the trusted samples
    first = np.argmax(marks != 0, axis=1)
    decisive = marks[np.arange(marks.shape[0]), first]
    fallback = np.where(x[:, settle:m - settle or None].mean(axis=1) > 0, 1, -1)
    marks[:, 0] = np.where(decisive != 0, decisive, fallback)
    idx = np.where(marks != 0, np.arange(m), 0)
    np.maximum.accumulate(idx, axis=1, out=idx)
    return np.take_along_axis(marks, idx, axis=1)


def _report(states: np.ndarray, dt: float) -> JumpReport:
    change = np.flatnonzero(np.diff(states)) + 1
    bounds = np.concatenate([[0], change, [states.size]])
    segments = [(int(states[a]), float((b - a) * dt)) for a, b in zip(bounds[:-1], bounds[1:])]
    return JumpReport(change * dt, states[change].astype(np.int8), states, dt, segments)


def detect_jumps(filtered: Record, s: float, threshold: float = 4.0, settle: int = 0):
    """Jump report(s) for a filtered record; a list for batched records."""
    st = detector_states(filtered.samples, s, threshold, settle)
    reports = [_report(row, filtered.dt) for row in st]
    return reports[0] if filtered.samples.ndim == 1 else reports


class InsufficientStatistics(RuntimeError):
    pass


def estimate_t1_counting(reports) -> tuple[float, float]:
    """Return ``(t1_bound, p_eq_est)`` from transition counting.

    ``t1_bound`` is the total excited dwell time divided by the number of
    downward transitions.  Unresolved pairs of jumps hide short excursions, so
    the estimate is biased upward; treat it as a bound.
    """
    reports = list(reports)
    if not reports:
        raise InsufficientStatistics("no jump reports given")
    excited = sum(r.dwell_excited for r in reports)
    total = sum(r.duration for r in reports)
    n_down = sum(r.n_down for r in reports)
    if n_down == 0:
        raise InsufficientStatistics("no downward transitions observed; T1 not estimable")
    return excited / n_down, excited / total


def estimate_t1_fit(records: Record, width: float | None = None) -> float:
    """T1 from an exponential fit to the sample-wise mean of (filtered) records.

    Pass raw records together with ``width`` to filter them first (with unit
    DC gain, so the ends of the trace are not distorted).
    """
    if width is not None:
        records = binomial_filter(records, width, scale_to_sigma=False)
    avg = np.atleast_2d(records.samples).mean(axis=0)
    fit = exponential_fit(records.times, avg)
    return fit["T"]


# --- serialization -----------------------------------------------------------

MAGIC = b"QNDR"
VERSION = 1
# magic, version, reserved, dt, record count, samples per record
_HEADER = struct.Struct("<4sHHdQQ")


def write_ndjson(path, rec: Record) -> None:
    """One JSON object per line: ``seed``, ``stream_id``, ``dt``, ``samples``."""
    x = np.atleast_2d(rec.samples)
    streams = rec.stream_ids if rec.stream_ids is not None else np.arange(x.shape[0])
    with atomic_open(path, "w") as fh:
        for sid, row in zip(streams, x):
            fh.write(json.dumps({"seed": int(rec.seed), "stream_id": int(sid),
                                 "dt": rec.dt, "samples": row.tolist()}))
            fh.write("\n")


def read_ndjson(path) -> Record:
    rows, streams, seed, dt = [], [], 0, None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            dt = obj["dt"] if dt is None else dt
            if obj["dt"] != dt:
                raise ValueError("records in one file must share dt")
            seed = obj.get("seed", 0)
            streams.append(obj.get("stream_id", len(streams)))
            rows.append(obj["samples"])
    if dt is None:
        raise ValueError(f"{path}: no records")
    return Record(np.array(rows, dtype=float), dt, None, seed, np.array(streams, dtype=np.uint64))


def write_binary(path, rec: Record) -> None:
    """Packed little-endian layout.

    Header ``<4sHHdQQ``: magic ``QNDR``, version, reserved, dt, record count,
    samples per record.  Then per record: seed (u64), stream id (u64) and the
    samples as float64.
    """
    x = np.atleast_2d(rec.samples).astype("<f8")
    count, n = x.shape
    streams = rec.stream_ids if rec.stream_ids is not None else np.arange(count)
    body = np.empty(count, dtype=[("seed", "<u8"), ("stream", "<u8"), ("samples", "<f8", (n,))])
    body["seed"] = rec.seed
    body["stream"] = streams
    body["samples"] = x
    with atomic_open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0, rec.dt, count, n))
        fh.write(body.tobytes())


def read_binary(path) -> Record:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, _, dt, count, n = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        dtype = np.dtype([("seed", "<u8"), ("stream", "<u8"), ("samples", "<f8", (n,))])
        body = np.frombuffer(fh.read(), dtype=dtype, count=count)
    seed = int(body["seed"][0]) if count else 0
    return Record(body["samples"].astype(float), dt, None, seed, body["stream"].copy())


__all__ = [
    "Record", "JumpReport", "InsufficientStatistics", "FitError",
    "generate_record", "generate_records", "binomial_filter", "binomial_taps",
    "filter_noise_gain", "filtered_center", "detect_jumps", "detector_states",
    "estimate_t1_counting", "estimate_t1_fit", "instantaneous_strength",
    "write_ndjson", "read_ndjson", "write_binary", "read_binary",
]
