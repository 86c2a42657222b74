"""Minimal deterministic SVG line plots of sweep tables."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import MissingColumn, TooFewRows
from .sweep import SweepResult

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 160, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf")


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    x = first
    while x <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(x) < 1e-12 * step else x)
        x += step
    return ticks


def _fmt(x):
    return f"{x:.2f}"


def render_svg(
    result: SweepResult,
    x_col: str,
    y_cols,
    path,
    group_col: str | None = None,
    title: str | None = None,
) -> Path:
    """Write a line plot with one polyline per y column (and per group value).

    Non-finite samples break a polyline rather than being plotted.
    """
    if isinstance(y_cols, str):
        y_cols = [y_cols]
    for name in [x_col, *y_cols] + ([group_col] if group_col else []):
        if name not in result.columns:
            raise MissingColumn(f"column {name!r} not in table")
    if len(result.rows) < 2:
        raise TooFewRows("a line plot needs at least 2 rows")

    x = result.column(x_col)
    series = []
    if group_col:
        groups = result.column(group_col)
        order = list(dict.fromkeys(groups.tolist()))
        for y_col in y_cols:
            for g in order:
                mask = groups == g
                series.append((f"{y_col} ({group_col}={g:g})", x[mask], result.column(y_col)[mask]))
    else:
        series = [(y_col, x, result.column(y_col)) for y_col in y_cols]

    xs = np.concatenate([s[1][np.isfinite(s[1]) & np.isfinite(s[2])] for s in series])
    ys = np.concatenate([s[2][np.isfinite(s[1]) & np.isfinite(s[2])] for s in series])
    x_lo, x_hi = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y_lo, y_hi = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(v):
        return MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v):
        return MARGIN_TOP + (y_hi - v) / (y_hi - y_lo) * plot_h

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    bottom = MARGIN_TOP + plot_h
    out.append(
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black" stroke-width="1"/>'
    )
    for tick in nice_ticks(x_lo, x_hi):
        if x_lo <= tick <= x_hi:
            xp = _fmt(px(tick))
            out.append(f'<line x1="{xp}" y1="{bottom}" x2="{xp}" y2="{bottom + 5}" stroke="black"/>')
            out.append(f'<text x="{xp}" y="{bottom + 18}" text-anchor="middle">{tick:g}</text>')
    for tick in nice_ticks(y_lo, y_hi):
        if y_lo <= tick <= y_hi:
            yp = _fmt(py(tick))
            out.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{yp}" x2="{MARGIN_LEFT}" y2="{yp}" stroke="black"/>')
            out.append(f'<text x="{MARGIN_LEFT - 8}" y="{yp}" text-anchor="end" dominant-baseline="middle">{tick:g}</text>')
    out.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.0f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(x_col)}</text>'
    )

    for i, (label, sx, sy) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(sx) & np.isfinite(sy)
        runs, current = [], []
        for xv, yv, good in zip(sx, sy, ok):
            if good:
                current.append(f"{_fmt(px(xv))},{_fmt(py(yv))}")
            elif current:
                runs.append(current)
                current = []
        if current:
            runs.append(current)
        for run in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(run)}"/>')
        ly = MARGIN_TOP + 14 * i + 6
        lx = WIDTH - MARGIN_RIGHT + 10
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")

    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    return path
