"""Output writers: atomic files, round-trip CSV, manifest, SVG heatmaps."""
from __future__ import annotations

from contextlib import contextmanager
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .maps import AXES, ConditionalMap


@contextmanager
def atomic_open(path, mode: str = "w"):
    """Open a temp file next to ``path``; it replaces ``path`` only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    kw = {} if "b" in mode else {"encoding": "utf-8", "newline": ""}
    try:
        with os.fdopen(fd, mode, **kw) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write(path, text: str) -> Path:
    with atomic_open(path) as fh:
        fh.write(text)
    return Path(path)


def fmt(v) -> str:
    """Shortest round-trip text for a number; NaN/None become an empty field."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def map_csv(cmap: ConditionalMap) -> str:
    """One row per bin: centers, outcome count, per-axis count and mean."""
    c = cmap.centers
    means = cmap.means()
    header = ["i", "q", "count"] + [f"n{a}" for a in AXES] + [f"mean{a}" for a in AXES]
    rows = []
    for a in range(cmap.bins):
        for b in range(cmap.bins):
            rows.append([c[a], c[b], cmap.hist[a, b],
                         *(cmap.counts[k, a, b] for k in range(3)),
                         *(means[k, a, b] for k in range(3))])
    return csv_text(header, rows)


def manifest_text(command: str, config_text: str, extra: dict | None = None) -> str:
    from . import __version__
    lines = [f"# qndsim {__version__} manifest", f"# command = {command}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {v}")
    return "\n".join(lines) + "\n" + config_text


# --- SVG heatmaps -------------------------------------------------------------

# Diverging ramp for values in [-1, 1]: blue (-1), white (0), red (+1).
DIVERGING = ((-1.0, (33, 102, 172)), (0.0, (247, 247, 247)), (1.0, (178, 24, 43)))
# Sequential ramp for log counts, dark to light.
SEQUENTIAL = ((0.0, (13, 8, 135)), (0.5, (204, 71, 120)), (1.0, (240, 249, 33)))
EMPTY = "#bdbdbd"


def ramp_color(v: float, ramp) -> str:
    if not math.isfinite(v):
        return EMPTY
    v = min(max(v, ramp[0][0]), ramp[-1][0])
    for (x0, c0), (x1, c1) in zip(ramp, ramp[1:]):
        if v <= x1:
            t = (v - x0) / (x1 - x0)
            rgb = (round(a + (b - a) * t) for a, b in zip(c0, c1))
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#{:02x}{:02x}{:02x}".format(*ramp[-1][1])


def heatmap_svg(values: np.ndarray, title: str, ramp, cell: int = 2, lo: float = -1.0,
                hi: float = 1.0, extent: float = 6.0) -> str:
    """Render ``values[i_bin, q_bin]`` with i across and q up.

    Values are mapped linearly from ``[lo, hi]`` onto the ramp's domain.
    Output depends only on the input array, so it is byte-reproducible.
    """
    n_i, n_q = values.shape
    pad, top = 40, 24
    w, h = n_i * cell, n_q * cell
    r0, r1 = ramp[0][0], ramp[-1][0]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + 2 * pad}" '
           f'height="{h + top + pad}" shape-rendering="crispEdges">',
           f'<text x="{pad}" y="16" font-family="sans-serif" font-size="12">{title}</text>',
           f'<g transform="translate({pad},{top})">']
    for a in range(n_i):
        for b in range(n_q):
            v = values[a, b]
            if math.isfinite(v):
                v = r0 + (r1 - r0) * (v - lo) / (hi - lo)
            out.append(f'<rect x="{a * cell}" y="{(n_q - 1 - b) * cell}" width="{cell}" '
                       f'height="{cell}" fill="{ramp_color(v, ramp)}"/>')
    out.append(f'<rect x="0" y="0" width="{w}" height="{h}" fill="none" stroke="black"/>')
    out.append("</g>")
    out.append(f'<text x="{pad}" y="{top + h + 14}" font-family="sans-serif" font-size="10">'
               f'I/sigma from {-extent:g} to {extent:g}; Q/sigma vertical</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def map_svgs(cmap: ConditionalMap, label: str) -> dict[str, str]:
    """SVG text for the outcome histogram and the three tomograms."""
    hist = cmap.hist.astype(float)
    logc = np.where(hist > 0, np.log10(np.maximum(hist, 1.0)), np.nan)
    top = float(np.nanmax(logc)) if np.isfinite(logc).any() else 1.0
    svgs = {"hist": heatmap_svg(logc, f"{label}: log10 counts (max {top:.3g})", SEQUENTIAL,
                                lo=0.0, hi=max(top, 1e-12), extent=cmap.half_range)}
    means = cmap.means()
    for k, a in enumerate(AXES):
        svgs[a] = heatmap_svg(means[k], f"{label}: <{a}>c", DIVERGING, extent=cmap.half_range)
    return svgs
