"""Bloch-vector state, device parameters and the outcome-conditioned update.

All outcome-like quantities are in scaled units where the per-quadrature
standard deviation of a measurement outcome is 1.  Convention: ``z = +1`` is
the excited state and sits at positive ``i``.

The update functions are written for numpy broadcasting: every field of a
:class:`BlochVector` and of an :class:`Outcome` may be a float or an array.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

TWO_PI = 2.0 * math.pi


class ParameterError(ValueError):
    """A parameter group violates one of its invariants."""


@dataclass(frozen=True)
class BlochVector:
    x: float | np.ndarray
    y: float | np.ndarray
    z: float | np.ndarray

    def __iter__(self):
        return iter((self.x, self.y, self.z))

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.x, self.y, self.z), axis=-1)


GROUND = BlochVector(0.0, 0.0, -1.0)
EXCITED = BlochVector(0.0, 0.0, 1.0)
PLUS_Y = BlochVector(0.0, 1.0, 0.0)


@dataclass(frozen=True)
class Outcome:
    i: float | np.ndarray
    q: float | np.ndarray


@dataclass(frozen=True)
class CavityParams:
    kappa: float  # rad/s
    chi: float  # rad/s

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ParameterError(f"cavity.kappa must be > 0, got {self.kappa!r}")
        if not (self.chi > 0 and math.isfinite(self.chi)):
            raise ParameterError(f"cavity.chi must be > 0, got {self.chi!r}")

    @classmethod
    def from_hz(cls, kappa_hz: float, chi_hz: float) -> "CavityParams":
        """Build from ordinary frequencies (kappa/2pi, chi/2pi in Hz)."""
        return cls(TWO_PI * kappa_hz, TWO_PI * chi_hz)


@dataclass(frozen=True)
class DriveParams:
    nbar: float
    t_m: float
    dt: float

    def __post_init__(self):
        if not self.nbar >= 0:
            raise ParameterError(f"drive.nbar must be >= 0, got {self.nbar!r}")
        if not self.t_m > 0:
            raise ParameterError(f"drive.t_m must be > 0, got {self.t_m!r}")
        if not self.dt > 0:
            raise ParameterError(f"drive.dt must be > 0, got {self.dt!r}")
        steps_per_window(self.t_m, self.dt)

    @property
    def steps(self) -> int:
        return steps_per_window(self.t_m, self.dt)


def steps_per_window(duration: float, dt: float) -> int:
    """Number of samples of period ``dt`` in ``duration``; must be integral."""
    ratio = duration / dt
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ParameterError(
            f"duration/dt must be a positive integer, got {duration!r}/{dt!r} = {ratio!r}"
        )
    return n


@dataclass(frozen=True)
class AmpParams:
    """Amplification chain: efficiency and the Q-offset ratio qbar/s.

    ``q_ratio=None`` means "use the geometric default cot(theta/2)", resolved
    by :meth:`resolved_q_ratio`.
    """

    eta: float
    q_ratio: float | None = None

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ParameterError(f"amp.eta must be in (0, 1], got {self.eta!r}")
        if self.q_ratio is not None and not math.isfinite(self.q_ratio):
            raise ParameterError(f"amp.q_ratio must be finite, got {self.q_ratio!r}")

    def resolved_q_ratio(self, cavity: CavityParams) -> float:
        if self.q_ratio is not None:
            return self.q_ratio
        return 1.0 / math.tan(dispersive_angle(cavity) / 2.0)


@dataclass(frozen=True)
class QubitParams:
    t1: float
    t2: float
    p_eq: float
    tau: float = 0.0

    def __post_init__(self):
        if not self.t1 > 0:
            raise ParameterError(f"qubit.t1 must be > 0, got {self.t1!r}")
        if not self.t2 > 0:
            raise ParameterError(f"qubit.t2 must be > 0, got {self.t2!r}")
        if self.t2 > 2.0 * self.t1 * (1 + 1e-12):
            raise ParameterError(
                f"qubit.t2 must satisfy t2 <= 2*t1, got t2={self.t2!r}, t1={self.t1!r}"
            )
        if not (0.0 <= self.p_eq < 0.5):
            raise ParameterError(f"qubit.p_eq must be in [0, 0.5), got {self.p_eq!r}")
        if not self.tau >= 0:
            raise ParameterError(f"qubit.tau must be >= 0, got {self.tau!r}")

    @property
    def z_eq(self) -> float:
        return 2.0 * self.p_eq - 1.0

    @property
    def rate_down(self) -> float:
        return (1.0 - self.p_eq) / self.t1

    @property
    def rate_up(self) -> float:
        return self.p_eq / self.t1


@dataclass(frozen=True)
class StrengthParams:
    """Apparent strength ``s`` and mean Q offset ``qbar``, both in units of sigma."""

    s: float
    qbar: float = 0.0
    theta_disp: float = math.nan

    def __post_init__(self):
        if not self.s >= 0:
            raise ParameterError(f"strength s must be >= 0, got {self.s!r}")
        if not math.isfinite(self.qbar):
            raise ParameterError(f"strength qbar must be finite, got {self.qbar!r}")

    @classmethod
    def from_ratio(cls, s: float, q_ratio: float, theta_disp: float = math.nan):
        return cls(s, q_ratio * s, theta_disp)


def dispersive_angle(cavity: CavityParams) -> float:
    return 2.0 * math.atan(cavity.chi / cavity.kappa)


def apparent_strength(cavity: CavityParams, drive: DriveParams, eta: float) -> float:
    """Separation of the outcome distributions, ``sqrt(2 nbar eta kappa T_m) sin(theta/2)``."""
    theta = dispersive_angle(cavity)
    return math.sqrt(2.0 * drive.nbar * eta * cavity.kappa * drive.t_m) * math.sin(theta / 2.0)


def strength_params(cavity: CavityParams, drive: DriveParams, amp: AmpParams) -> StrengthParams:
    s = apparent_strength(cavity, drive, amp.eta)
    return StrengthParams(s, amp.resolved_q_ratio(cavity) * s, dispersive_angle(cavity))


def _sech(x):
    # overflow-free for any finite x
    ax = np.abs(x)
    return 2.0 * np.exp(-ax) / (1.0 + np.exp(-2.0 * ax))


def _phase(q, s, qbar, eta):
    return q * s + qbar * s * ((1.0 - eta) / eta)


def _damping(s, eta):
    return np.exp(-(s * s) * ((1.0 - eta) / eta))


def update_eq1(out: Outcome, sp: StrengthParams, eta: float = 1.0) -> BlochVector:
    """Final Bloch vector after one measurement of a qubit starting at +y.

    Parameters
    ----------
    out : Outcome
        Scaled outcome ``(I_m/sigma, Q_m/sigma)``.
    sp : StrengthParams
        Apparent strength ``s`` and mean Q offset ``qbar`` of the observed channel.
    eta : float
        Quantum efficiency of the amplification chain.
    """
    s = sp.s
    arg = out.i * s
    phi = _phase(out.q, s, sp.qbar, eta)
    g = _sech(arg) * _damping(s, eta)
    return BlochVector(np.sin(phi) * g, np.cos(phi) * g, np.tanh(arg))


def update_general(init: BlochVector, out: Outcome, sp: StrengthParams,
                   eta: float = 1.0) -> BlochVector:
    """Measurement update for an arbitrary (possibly mixed) initial state.

    Populations follow the two-hypothesis Bayes rule,
    ``z_f = tanh(atanh(z_i) + i*s)``, which equals
    ``(z_i + a)/(1 + z_i a)`` with ``a = tanh(i*s)``.  The coherence
    ``x + iy`` is multiplied by ``cosh(L)/cosh(L + i*s)`` (``L = atanh(z_i)``),
    rotated about z by ``-phi`` and damped by the inefficiency factor.
    Starting from +y this reproduces :func:`update_eq1` bit for bit.
    """
    s = sp.s
    arg = out.i * s
    zi = np.asarray(init.z, dtype=float)
    pole = np.abs(zi) >= 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.arctanh(zi)
        zf = np.tanh(lo + arg)
        ratio = np.where(pole, 0.0, _sech(lo + arg) / _sech(lo))
    phi = _phase(out.q, s, sp.qbar, eta)
    g = ratio * _damping(s, eta)
    c, sn = np.cos(phi), np.sin(phi)
    xf = (init.x * c + init.y * sn) * g
    yf = (init.y * c - init.x * sn) * g
    if np.ndim(xf) == 0:
        return BlochVector(float(xf), float(yf), float(zf))
    return BlochVector(xf, yf, zf)


def rotate(b: BlochVector, axis: str, angle: float) -> BlochVector:
    """Right-handed rotation about +x or +y."""
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        return BlochVector(b.x, b.y * c - b.z * s, b.y * s + b.z * c)
    if axis == "y":
        return BlochVector(b.x * c + b.z * s, b.y, -b.x * s + b.z * c)
    raise ValueError(f"rotation axis must be 'x' or 'y', got {axis!r}")


def relax(b: BlochVector, duration: float, qp: QubitParams,
          t1_time: float | None = None) -> BlochVector:
    """Free decay: z relaxes toward equilibrium with T1, coherence decays with T2.

    ``t1_time`` lets the population and coherence see different durations;
    it defaults to ``duration``.
    """
    t1_time = duration if t1_time is None else t1_time
    fz = math.exp(-t1_time / qp.t1)
    fc = math.exp(-duration / qp.t2)
    z_eq = qp.z_eq
    return BlochVector(b.x * fc, b.y * fc, z_eq + (b.z - z_eq) * fz)


def purity(b: BlochVector):
    """Euclidean length of the Bloch vector."""
    return np.sqrt(b.x * b.x + b.y * b.y + b.z * b.z)
