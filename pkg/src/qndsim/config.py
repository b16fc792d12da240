"""Run configuration in a flat ``section.key = value`` text format.

Lines starting with ``#`` are comments.  Floats are written with ``repr`` so a
dump/parse cycle is lossless.  Unknown keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
import math

from .core import (AmpParams, CavityParams, DriveParams, ParameterError, QubitParams,
                   StrengthParams, apparent_strength)
from .tomography import Timing


class ConfigError(ValueError):
    pass


FORMATS = ("csv", "ndjson", "svg")


@dataclass(frozen=True)
class RunConfig:
    # cavity (ordinary frequencies)
    kappa_hz: float = 5.8e6
    chi_hz: float = 5.4e6
    # drive / sampling
    t_m: float = 240e-9
    dt: float = 20e-9
    # qubit
    t1: float = 2.8e-6
    t2: float = 0.698e-6
    p_eq: float = 0.08
    tau: float = 380e-9
    tau_pre_fraction: float = 0.0
    # amplifier; q_ratio None means cot(theta/2)
    eta: float = 0.2
    q_ratio: float | None = 1.28
    # strong readout
    readout_s: float = 2.4
    readout_threshold: float = 1.5
    thetas: tuple = (0.0, math.pi / 2, math.pi)
    readout_trials: int = 1_000_000
    # jumps
    traces: int = 25_000
    trace_duration: float = 8e-6
    jump_threshold: float = 4.0
    filter_width: float = 240e-9
    # back-action maps and sweep
    map_nbar: tuple = (5e-3, 5e-2, 5e-1, 5.0)
    sweep_points: int = 11
    sweep_nbar_max: float = 5.0
    sweep_trials: int = 1_000_000
    bins: int = 201
    half_range: float = 6.0
    window: float = 1.0
    # run
    seed: int = 20130
    threads: int = 1
    out: str = "out"
    formats: tuple = ("csv", "svg")

    def __post_init__(self):
        self.validate()

    # -- derived parameter groups --
    @property
    def cavity(self) -> CavityParams:
        return CavityParams.from_hz(self.kappa_hz, self.chi_hz)

    @property
    def qubit(self) -> QubitParams:
        return QubitParams(self.t1, self.t2, self.p_eq, self.tau)

    @property
    def amp(self) -> AmpParams:
        return AmpParams(self.eta, self.q_ratio)

    @property
    def timing(self) -> Timing:
        return Timing(self.t_m, self.dt, self.tau_pre_fraction)

    def drive(self, nbar: float) -> DriveParams:
        return DriveParams(nbar, self.t_m, self.dt)

    def weak_strength(self, nbar: float) -> StrengthParams:
        s = apparent_strength(self.cavity, self.drive(nbar), self.eta)
        return StrengthParams.from_ratio(s, self.amp.resolved_q_ratio(self.cavity))

    @property
    def strong_strength(self) -> StrengthParams:
        return StrengthParams(self.readout_s)

    def sweep_nbar(self) -> list[float]:
        """Points linear in sqrt(nbar) from 0 to sqrt(sweep_nbar_max)."""
        top = math.sqrt(self.sweep_nbar_max)
        n = self.sweep_points
        return [(top * k / (n - 1)) ** 2 for k in range(n)] if n > 1 else [0.0]

    def validate(self) -> None:
        # each parameter group checks its own invariants
        try:
            self.cavity, self.qubit, self.amp, self.drive(0.0)
            DriveParams(0.0, self.filter_width, self.dt)
            DriveParams(0.0, self.trace_duration, self.dt)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (0.0 <= self.tau_pre_fraction <= 1.0, "qubit.tau_pre_fraction must be in [0, 1]"),
            (self.readout_s >= 2.0, "readout.s must be >= 2 for state preparation"),
            (self.readout_threshold >= 0, "readout.threshold must be >= 0"),
            (all(0.0 <= t < 2 * math.pi for t in self.thetas), "readout.thetas must lie in [0, 2pi)"),
            (self.readout_trials >= 0, "readout.trials must be >= 0"),
            (self.traces >= 1, "jumps.traces must be >= 1"),
            (self.jump_threshold > 0, "jumps.threshold must be > 0"),
            (all(n >= 0 for n in self.map_nbar), "map.nbar entries must be >= 0"),
            (self.sweep_points >= 2, "sweep.points must be >= 2"),
            (self.sweep_nbar_max > 0, "sweep.nbar_max must be > 0"),
            (self.sweep_trials >= 0, "sweep.trials must be >= 0"),
            (self.bins >= 1, "map.bins must be >= 1"),
            (self.half_range > 0, "map.half_range must be > 0"),
            (self.window > 0, "map.window must be > 0"),
            (0 <= self.seed < 2 ** 64, "run.seed must be a 64-bit unsigned integer"),
            (self.threads >= 1, "run.threads must be >= 1"),
            (all(f in FORMATS for f in self.formats), f"run.formats must be drawn from {FORMATS}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


# key in the text file -> (attribute, kind)
KEYS = {
    "cavity.kappa_hz": ("kappa_hz", float),
    "cavity.chi_hz": ("chi_hz", float),
    "drive.t_m": ("t_m", float),
    "drive.dt": ("dt", float),
    "qubit.t1": ("t1", float),
    "qubit.t2": ("t2", float),
    "qubit.p_eq": ("p_eq", float),
    "qubit.tau": ("tau", float),
    "qubit.tau_pre_fraction": ("tau_pre_fraction", float),
    "amp.eta": ("eta", float),
    "amp.q_ratio": ("q_ratio", "ratio"),
    "readout.s": ("readout_s", float),
    "readout.threshold": ("readout_threshold", float),
    "readout.thetas": ("thetas", "floats"),
    "readout.trials": ("readout_trials", int),
    "jumps.traces": ("traces", int),
    "jumps.duration": ("trace_duration", float),
    "jumps.threshold": ("jump_threshold", float),
    "jumps.filter_width": ("filter_width", float),
    "map.nbar": ("map_nbar", "floats"),
    "map.bins": ("bins", int),
    "map.half_range": ("half_range", float),
    "map.window": ("window", float),
    "sweep.points": ("sweep_points", int),
    "sweep.nbar_max": ("sweep_nbar_max", float),
    "sweep.trials": ("sweep_trials", int),
    "run.seed": ("seed", int),
    "run.threads": ("threads", int),
    "run.out": ("out", str),
    "run.formats": ("formats", "words"),
}
_ATTR = {attr: key for key, (attr, _) in KEYS.items()}
assert set(_ATTR) == {f.name for f in fields(RunConfig)}


def _parse_value(key, kind, text):
    try:
        if kind is float:
            return float(text)
        if kind is int:
            return int(text)
        if kind is str:
            return text
        if kind == "ratio":
            return None if text == "auto" else float(text)
        if kind == "floats":
            return tuple(float(t) for t in text.split(",") if t.strip())
        if kind == "words":
            return tuple(t.strip() for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None
    raise AssertionError(kind)


def _format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    values = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'section.key = value', got {raw!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        attr, kind = KEYS[key]
        values[attr] = _parse_value(key, kind, val)
    return with_overrides(base or RunConfig(), **values)


def with_overrides(cfg: RunConfig, **values) -> RunConfig:
    return replace(cfg, **values)


def dump_config(cfg: RunConfig) -> str:
    lines = [f"{key} = {_format_value(getattr(cfg, attr))}" for key, (attr, _) in KEYS.items()]
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
