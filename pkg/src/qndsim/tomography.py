"""Prepare / weak-measure / tomograph protocol and its analysis.

A trial: strong readout of a thermal qubit (kept only if it reads ground),
rotation to +y, a weak measurement whose lost channel is simulated but not
recorded, a dead time of free decay, then a strong readout along X, Y or Z
(cycled by trial index).
"""
from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import ndtr

from .core import (GROUND, AmpParams, BlochVector, QubitParams, StrengthParams,
                   relax, rotate, update_general)
from .estimators import FitError, weighted_linear_fit
from .maps import AXES, AXIS_INDEX, ConditionalMap
from .rng import SeedPlan
from .sampler import (integrated_outcome, sample_label, sample_outcome,
                      sample_telegraph, split_observed)


@dataclass(frozen=True)
class Trials:
    """Struct-of-arrays trial results; ``axis`` is 0/1/2 for X/Y/Z."""

    prep_i: np.ndarray
    prep_q: np.ndarray
    weak_i: np.ndarray
    weak_q: np.ndarray
    axis: np.ndarray
    tomo_i: np.ndarray
    tomo_q: np.ndarray

    @property
    def eigenvalue(self) -> np.ndarray:
        return np.where(self.tomo_i > 0, 1, -1).astype(np.int8)

    def __len__(self):
        return self.prep_i.size

    def subset(self, mask) -> "Trials":
        return Trials(*(getattr(self, f)[mask] for f in self.__dataclass_fields__))


@dataclass(frozen=True)
class Timing:
    t_m: float = 240e-9
    dt: float = 20e-9
    tau_pre_fraction: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.tau_pre_fraction <= 1.0):
            raise ValueError("tau_pre_fraction must be within [0, 1]")


def _strong_readout(z, sp_strong, qp, timing, rng):
    label = sample_label(z, rng)
    path = sample_telegraph(qp, label, timing.t_m, timing.dt, rng)
    return integrated_outcome(path, sp_strong, rng), path.final


def run_protocol(sp_weak: StrengthParams, sp_strong: StrengthParams, qp: QubitParams,
                 amp: AmpParams, n_trials: int, seeds: SeedPlan, timing: Timing = Timing(),
                 first_trial: int = 0) -> Trials:
    """Simulate ``n_trials`` trials from one random stream.

    ``sp_weak`` is the observed-channel strength; the lost channel follows
    from ``amp.eta``.  Trial ``k`` tomographs axis ``(first_trial + k) % 3``.
    """
    if sp_strong.s < 2.0:
        raise ValueError(f"strong readout needs s >= 2 to prepare states, got {sp_strong.s!r}")
    rng = seeds.generator()
    n = n_trials
    # preparation
    prep, final = _strong_readout(np.full(n, qp.z_eq), sp_strong, qp, timing, rng)
    state = rotate(BlochVector(np.zeros(n), np.zeros(n), final.astype(float)), "x", math.pi / 2)
    tau_pre = qp.tau * timing.tau_pre_fraction
    if tau_pre > 0:
        state = relax(state, tau_pre, qp)
    # weak measurement, observed and lost channels
    split = split_observed(sp_weak, amp.eta)
    label = sample_label(state.z, rng)
    obs = sample_outcome(label, split.observed, rng)
    lost = sample_outcome(label, split.lost, rng)
    state = update_general(state, obs, split.observed, 1.0)
    if split.s_lost > 0:
        state = update_general(state, lost, split.lost, 1.0)
    tau_post = qp.tau - tau_pre
    if tau_post > 0:
        state = relax(state, tau_post, qp)
    # tomography
    axis = ((first_trial + np.arange(n)) % 3).astype(np.int8)
    zx = rotate(state, "y", -math.pi / 2).z
    zy = rotate(state, "x", math.pi / 2).z
    zt = np.choose(axis, [zx, zy, state.z])
    tomo, _ = _strong_readout(np.clip(zt, -1.0, 1.0), sp_strong, qp, timing, rng)
    return Trials(prep.i, prep.q, obs.i, obs.q, axis, tomo.i, tomo.q)


def post_select(trials: Trials, threshold: float = 1.5, warn_below: float = 0.01) -> Trials:
    """Keep trials prepared in ground (``prep_i < -threshold``) with a clear
    tomography result (``|tomo_i| > threshold``)."""
    if not threshold >= 0:
        raise ValueError("threshold must be >= 0")
    if threshold == 0:
        keep = trials.prep_i < 0
    else:
        keep = (trials.prep_i < -threshold) & (np.abs(trials.tomo_i) > threshold)
    kept = trials.subset(keep)
    if len(trials) and len(kept) < warn_below * len(trials):
        warnings.warn(f"post-selection retained {len(kept)} of {len(trials)} trials; "
                      "statistics are insufficient", RuntimeWarning, stacklevel=2)
    return kept


def bin_conditional(trials: Trials, bins: int = 201, half_range: float = 6.0,
                    into: ConditionalMap | None = None) -> ConditionalMap:
    cmap = into if into is not None else ConditionalMap(bins, half_range)
    cmap.add_tomography(trials.weak_i, trials.weak_q, trials.axis, trials.eigenvalue)
    return cmap


@dataclass(frozen=True)
class Gradient:
    slope: float
    stderr: float
    n: int


class InsufficientData(RuntimeError):
    pass


def gradient_at_origin(cmap: ConditionalMap, numerator: str, denominator: str,
                       window: float = 1.0, min_counts: int = 100) -> Gradient:
    """Count-weighted regression of per-bin means against ``i`` or ``q``.

    Uses every non-empty bin whose center lies within ``|i|, |q| <= window``.
    The standard error propagates each bin's own scatter.
    """
    k = AXIS_INDEX[numerator]
    c = cmap.centers
    ci, cq = np.meshgrid(c, c, indexing="ij")
    coord = {"i": ci, "q": cq}[denominator]
    sel = (np.abs(ci) <= window) & (np.abs(cq) <= window) & (cmap.counts[k] > 0)
    n_b = cmap.counts[k][sel].astype(float)
    total = int(n_b.sum())
    if total == 0:
        raise InsufficientData(f"no <{numerator}> counts within |i|,|q| <= {window}")
    if total < min_counts:
        raise InsufficientData(f"only {total} <{numerator}> counts in the fit window "
                               f"(need {min_counts})")
    x = coord[sel]
    y = cmap.means()[k][sel]
    fit = weighted_linear_fit(x, y, n_b)
    dx = x - (n_b * x).sum() / n_b.sum()
    sxx = (n_b * dx * dx).sum()
    # residual variance pooled over individual trials; per-bin variances are
    # useless for the many bins holding one or two trials
    pred = fit["intercept"] + fit["slope"] * x
    rss = (cmap.sumsq[k][sel] - 2.0 * pred * cmap.sums[k][sel] + n_b * pred * pred).sum()
    dof = max(total - 2, 1)
    se = math.sqrt(max(rss, 0.0) / dof / sxx)
    return Gradient(fit["slope"], se, total)


def unconditioned_mean(trials: Trials, axis: str) -> tuple[float, float, int]:
    """Mean tomography eigenvalue of one axis over all trials, with its SE."""
    sel = trials.axis == AXIS_INDEX[axis]
    ev = trials.eigenvalue[sel].astype(float)
    n = ev.size
    if n == 0:
        return math.nan, math.nan, 0
    m = ev.mean()
    return float(m), float(math.sqrt(max(1.0 - m * m, 0.0) / n)), n


# --- closed-form curves -----------------------------------------------------

def theory_slope_z(s, qp: QubitParams):
    """z back-action slope at the origin, first order in the dead time."""
    return s * math.exp(-qp.tau / qp.t1)


def theory_slope_x(s, qbar, eta: float, qp: QubitParams):
    r = (1.0 - eta) / eta
    return s * np.cos(qbar * s * r) * np.exp(-(s * s) * r) * math.exp(-qp.tau / qp.t2)


def theory_y(s, qbar, eta: float, qp: QubitParams):
    """Unconditioned <Y> after the weak measurement and dead time."""
    return np.exp(-(s * s) / eta) * np.cos(s * qbar / eta) * math.exp(-qp.tau / qp.t2)


# --- strong readout histograms ---------------------------------------------

@dataclass(frozen=True)
class StrongHistogram:
    theta: float
    edges: np.ndarray
    counts: np.ndarray
    n_trials: int
    frac_positive: float

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])


DEFAULT_EDGES = np.linspace(-8.0, 8.0, 321)


def strong_outcomes(theta: float, n_trials: int, sp_strong: StrengthParams, qp: QubitParams,
                    seeds: SeedPlan, timing: Timing = Timing()) -> np.ndarray:
    """Integrated ``i`` of one readout window after ``R_x(theta)`` on a thermal qubit."""
    rng = seeds.generator()
    lab0 = sample_label(np.full(n_trials, qp.z_eq), rng)
    b = rotate(BlochVector(0.0, 0.0, lab0.astype(float)), "x", theta)
    out, _ = _strong_readout(np.clip(b.z, -1.0, 1.0), sp_strong, qp, timing, rng)
    return out.i


def strong_histogram(theta: float, i_values: np.ndarray, edges=DEFAULT_EDGES) -> StrongHistogram:
    if not (0.0 <= theta < 2.0 * math.pi):
        raise ValueError(f"theta must be in [0, 2pi), got {theta!r}")
    counts, _ = np.histogram(i_values, bins=edges)
    n = int(np.size(i_values))
    frac = float(np.count_nonzero(i_values > 0)) / n if n else math.nan
    return StrongHistogram(theta, np.asarray(edges), counts, n, frac)


def _readout_model(x, w, mu_g, mu_e, p_down, p_up, sigma):
    # Each state: Gaussian, plus a "bridge" for a jump at a uniform time in
    # the window, which spreads the integrated mean evenly between centers.
    def gauss(m):
        return np.exp(-0.5 * ((x - m) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    bridge = (ndtr((x - mu_g) / sigma) - ndtr((x - mu_e) / sigma)) / (mu_e - mu_g)
    g = (1.0 - p_up) * gauss(mu_g) + p_up * bridge
    e = (1.0 - p_down) * gauss(mu_e) + p_down * bridge
    return (1.0 - w) * g + w * e


@dataclass(frozen=True)
class MixtureFit:
    mu_g: float
    mu_e: float
    sigma: float
    weight_e: float
    p_down: float = 0.0
    p_up: float = 0.0

    @property
    def separation(self) -> float:
        return (self.mu_e - self.mu_g) / self.sigma

    @property
    def fidelity(self) -> float:
        """``1 - P(i > 0 | g) - P(i < 0 | e)`` for the fitted Gaussian components."""
        return float(1.0 - ndtr(self.mu_g / self.sigma) - ndtr(-self.mu_e / self.sigma))


def fit_mixture(hists) -> MixtureFit:
    """Fit the pooled histogram density with a two-state readout model.

    Each state contributes a Gaussian (common width) plus a bridge term for
    a single jump during the window, so decay during readout does not drag
    the fitted centers toward each other.
    """
    hists = list(hists)
    edges = hists[0].edges
    counts = sum(h.counts for h in hists).astype(float)
    n = counts.sum()
    if n == 0:
        raise FitError("no counts to fit")
    width = np.diff(edges)
    x = 0.5 * (edges[1:] + edges[:-1])
    dens = counts / (n * width)
    err = np.sqrt(np.maximum(counts, 1.0)) / (n * width)
    w0 = float(np.clip((counts[x > 0]).sum() / n, 0.05, 0.95))
    p0 = [w0, -2.0, 2.0, 0.02, 0.02, 1.0]
    lo = [0.0, -np.inf, -np.inf, 0.0, 0.0, 1e-2]
    hi = [1.0, np.inf, np.inf, 1.0, 1.0, np.inf]
    try:
        p, _ = curve_fit(_readout_model, x, dens, p0=p0, sigma=err, bounds=(lo, hi))
    except RuntimeError as exc:
        raise FitError(f"readout histogram fit failed: {exc}") from exc
    w, mu_a, mu_b, pd, pu, sig = p
    if mu_a > mu_b:
        mu_a, mu_b, w, pd, pu = mu_b, mu_a, 1.0 - w, pu, pd
    return MixtureFit(float(mu_a), float(mu_b), float(sig), float(w), float(pd), float(pu))


@dataclass(frozen=True)
class FidelityReport:
    separation: float
    fidelity: float
    assignment_fidelity: float
    mixture: MixtureFit


def fidelity_report(hist_g: StrongHistogram, hist_e: StrongHistogram,
                    extra=()) -> FidelityReport:
    """Separation and fidelity from histograms of readouts after ``theta = 0`` and ``pi``.

    ``fidelity`` is the overlap-limited value of the fitted state components;
    ``assignment_fidelity`` counts raw misassignments with threshold 0, so it
    also carries thermal population and decay during the window.
    """
    mix = fit_mixture([hist_g, hist_e, *extra])
    raw = 1.0 - hist_g.frac_positive - (1.0 - hist_e.frac_positive)
    return FidelityReport(mix.separation, mix.fidelity, raw, mix)


__all__ = [
    "Trials", "Timing", "run_protocol", "post_select", "bin_conditional", "Gradient",
    "InsufficientData", "gradient_at_origin", "unconditioned_mean", "theory_slope_z",
    "theory_slope_x", "theory_y", "StrongHistogram", "strong_outcomes", "strong_histogram",
    "MixtureFit", "fit_mixture", "FidelityReport", "fidelity_report", "GROUND", "AXES",
]
