"""Command-line entry points.

    qndsim strong-readout | jumps | backaction-map | figure4
        [--config PATH] [--seed N] [--threads N] [--out DIR] [--trials N]
        [--format csv|ndjson|svg ...]

Every command writes ``manifest.txt`` (resolved config and seed) next to its
outputs.  Files are written atomically.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .config import FORMATS, ConfigError, RunConfig, dump_config, load_config, with_overrides
from .core import ParameterError
from .estimators import FitError, exponential_fit
from .io import atomic_write, csv_text, fmt, manifest_text, map_csv, map_svgs
from .records import (InsufficientStatistics, Record, binomial_filter, detect_jumps,
                      estimate_t1_counting, filtered_center, generate_records, write_binary,
                      write_ndjson)
from .rng import SeedPlan, sub_stream
from .runner import run_blocks, simulate_backaction
from .tomography import (DEFAULT_EDGES, InsufficientData, fidelity_report, gradient_at_origin,
                         strong_histogram, strong_outcomes, theory_slope_x, theory_slope_z,
                         theory_y)

# disjoint stream-id ranges per command
STREAM_READOUT = 1 << 60
STREAM_JUMPS = 2 << 60
STREAM_MAP = 3 << 60
STREAM_FIGURE4 = 4 << 60

JUMP_CHUNK = 1024


def _write_manifest(out: Path, command: str, cfg: RunConfig, extra=None):
    atomic_write(out / "manifest.txt", manifest_text(command, dump_config(cfg), extra))


# --- strong-readout -----------------------------------------------------------

def _readout_values(cfg: RunConfig, theta: float, index: int) -> np.ndarray:
    base = sub_stream(STREAM_READOUT, index)

    def block(b, start, stop):
        return strong_outcomes(theta, stop - start, cfg.strong_strength, cfg.qubit,
                               SeedPlan(cfg.seed, base + b), cfg.timing)

    parts = list(run_blocks(block, cfg.readout_trials, cfg.threads))
    return np.concatenate(parts) if parts else np.empty(0)


def cmd_strong_readout(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    thetas = list(dict.fromkeys([0.0, math.pi, *cfg.thetas]))
    hists = {th: strong_histogram(th, _readout_values(cfg, th, k), DEFAULT_EDGES)
             for k, th in enumerate(thetas)}
    for k, th in enumerate(cfg.thetas):
        h = hists[th]
        rows = zip(h.edges[:-1], h.edges[1:], h.centers, h.counts)
        atomic_write(out / f"readout_theta{k}.csv",
                     csv_text(["lo", "hi", "center", "count"], rows))
    summary = {"theta_g": 0.0, "theta_e": math.pi, "trials": cfg.readout_trials}
    try:
        rep = fidelity_report(hists[0.0], hists[math.pi])
        m = rep.mixture
        summary.update(separation=rep.separation, fidelity=rep.fidelity,
                       assignment_fidelity=rep.assignment_fidelity, mu_g=m.mu_g, mu_e=m.mu_e,
                       sigma=m.sigma, p_down=m.p_down, p_up=m.p_up, note="")
    except FitError as exc:
        summary.update(separation=None, fidelity=None, assignment_fidelity=None, mu_g=None,
                       mu_e=None, sigma=None, p_down=None, p_up=None, note=str(exc))
    atomic_write(out / "fidelity.csv", _kv_csv(summary))
    _write_manifest(out, "strong-readout", cfg)
    return summary


def _kv_csv(d: dict) -> str:
    rows = [[k, v if isinstance(v, str) else fmt(v)] for k, v in d.items()]
    return "\n".join(["key,value"] + [f"{k},{v}" for k, v in rows]) + "\n"


# --- jumps --------------------------------------------------------------------

def _record_chunks(cfg: RunConfig, base: int, initial_z):
    sp = cfg.strong_strength

    def chunk(c, start, stop):
        return generate_records(sp, cfg.qubit, stop - start, cfg.trace_duration, cfg.dt,
                                cfg.t_m, SeedPlan(cfg.seed, base).child(start), initial_z)

    return run_blocks(chunk, cfg.traces, cfg.threads, JUMP_CHUNK)


def cmd_jumps(cfg: RunConfig) -> dict:
    """Detect jumps in thermal traces; fit T1 to the mean of excited-prepared traces."""
    out = Path(cfg.out)
    settle = round(cfg.filter_width / cfg.dt) // 2
    center = filtered_center(cfg.readout_s, cfg.t_m, cfg.dt, cfg.filter_width)
    reports, raw = [], []
    for rec in _record_chunks(cfg, STREAM_JUMPS, None):
        raw.append(rec)
        filt = binomial_filter(rec, cfg.filter_width)
        reports.extend(detect_jumps(filt, center, cfg.jump_threshold, settle))
    acc, n = None, 0
    for rec in _record_chunks(cfg, sub_stream(STREAM_JUMPS, 1), 1.0):
        s = binomial_filter(rec, cfg.filter_width, scale_to_sigma=False).samples.sum(axis=0)
        acc = s if acc is None else acc + s
        n += len(rec)
    records = Record(np.concatenate([r.samples for r in raw]), cfg.dt, seed=cfg.seed,
                     stream_ids=np.concatenate([r.stream_ids for r in raw]))
    summary = {"traces": cfg.traces, "duration": cfg.trace_duration,
               "n_down": sum(r.n_down for r in reports), "n_up": sum(r.n_up for r in reports),
               "detector_center": center, "threshold": cfg.jump_threshold}
    notes = []
    try:
        summary["t1_bound"], summary["p_eq_est"] = estimate_t1_counting(reports)
    except InsufficientStatistics as exc:
        summary["t1_bound"] = summary["p_eq_est"] = None
        notes.append(str(exc))
    try:
        fit = exponential_fit(records.times, acc / n)
        summary["t1_fit"], summary["t1_fit_stderr"] = fit["T"], fit.stderr["T"]
    except FitError as exc:
        summary["t1_fit"] = summary["t1_fit_stderr"] = None
        notes.append(str(exc))
    summary["note"] = "; ".join(notes)
    write_binary(out / "records.bin", records)
    if "ndjson" in cfg.formats:
        write_ndjson(out / "records.ndjson", records)
    rows = [[k, j.times[m], j.directions[m]] for k, j in enumerate(reports)
            for m in range(len(j.times))]
    atomic_write(out / "jumps.csv", csv_text(["trace", "time", "direction"], rows))
    atomic_write(out / "jump_summary.csv", _kv_csv(summary))
    _write_manifest(out, "jumps", cfg)
    return summary


# --- back-action maps and figure 4 -------------------------------------------

def _simulate(cfg: RunConfig, nbar: float, base: int):
    sp = cfg.weak_strength(nbar)
    res = simulate_backaction(sp, cfg.strong_strength, cfg.qubit, cfg.amp, cfg.sweep_trials,
                              cfg.seed, base, cfg.timing, cfg.bins, cfg.half_range,
                              cfg.readout_threshold, cfg.threads)
    return sp, res


def _gradient(cmap, num, den, window):
    try:
        g = gradient_at_origin(cmap, num, den, window)
        return g.slope, g.stderr
    except (InsufficientData, FitError):
        return None, None


def cmd_backaction_map(cfg: RunConfig) -> list:
    out = Path(cfg.out)
    rows = []
    for k, nbar in enumerate(cfg.map_nbar):
        sp, res = _simulate(cfg, nbar, sub_stream(STREAM_MAP, k))
        tag = f"map{k}"
        if "csv" in cfg.formats:
            atomic_write(out / f"{tag}.csv", map_csv(res.cmap))
        if "svg" in cfg.formats:
            for name, text in map_svgs(res.cmap, f"nbar={nbar:g}, s={sp.s:.3g}").items():
                atomic_write(out / f"{tag}_{name}.svg", text)
        zs, zse = _gradient(res.cmap, "Z", "i", cfg.window)
        xs, xse = _gradient(res.cmap, "X", "q", cfg.window)
        rows.append([k, nbar, sp.s, sp.qbar, res.n_trials, res.n_retained, res.cmap.overflow,
                     zs, zse, xs, xse, res.y_mean, res.y_stderr])
    header = ["index", "nbar", "s", "qbar", "trials", "retained", "overflow", "z_slope",
              "z_slope_se", "x_slope", "x_slope_se", "y_mean", "y_mean_se"]
    atomic_write(out / "maps_summary.csv", csv_text(header, rows))
    _write_manifest(out, "backaction-map", cfg)
    return rows


FIGURE4_HEADER = ["nbar", "s", "qbar", "retained", "z_slope_sim", "z_slope_se",
                  "z_slope_theory", "x_slope_sim", "x_slope_se", "x_slope_theory", "y_sim",
                  "y_se", "y_theory"]


def cmd_figure4(cfg: RunConfig) -> list:
    out = Path(cfg.out)
    qp = cfg.qubit
    rows = []
    for k, nbar in enumerate(cfg.sweep_nbar()):
        sp, res = _simulate(cfg, nbar, sub_stream(STREAM_FIGURE4, k))
        zs, zse = _gradient(res.cmap, "Z", "i", cfg.window)
        xs, xse = _gradient(res.cmap, "X", "q", cfg.window)
        rows.append([nbar, sp.s, sp.qbar, res.n_retained, zs, zse, theory_slope_z(sp.s, qp),
                     xs, xse, float(theory_slope_x(sp.s, sp.qbar, cfg.eta, qp)), res.y_mean,
                     res.y_stderr, float(theory_y(sp.s, sp.qbar, cfg.eta, qp))])
    atomic_write(out / "figure4.csv", csv_text(FIGURE4_HEADER, rows))
    _write_manifest(out, "figure4", cfg)
    return rows


COMMANDS = {
    "strong-readout": (cmd_strong_readout, "readout_trials"),
    "jumps": (cmd_jumps, "traces"),
    "backaction-map": (cmd_backaction_map, "sweep_trials"),
    "figure4": (cmd_figure4, "sweep_trials"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qndsim",
                                description="Weak-measurement back-action simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="key = value config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--out", type=str)
        sp.add_argument("--trials", type=int, help="trials (traces for 'jumps')")
        sp.add_argument("--format", dest="formats", action="append", choices=FORMATS)
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {k: getattr(args, k) for k in ("seed", "threads", "out")
            if getattr(args, k) is not None}
    if args.trials is not None:
        over[COMMANDS[args.command][1]] = args.trials
    if args.formats:
        over["formats"] = tuple(dict.fromkeys(args.formats))
    return with_overrides(cfg, **over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        fn = COMMANDS[args.command][0]
        fn(cfg)
    except (ConfigError, ParameterError, FitError, InsufficientData, InsufficientStatistics,
            OSError, ValueError) as exc:
        print(f"qndsim {args.command}: error: {exc}", file=sys.stderr)
        return 2
    print(f"qndsim {args.command}: wrote outputs to {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
