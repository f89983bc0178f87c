"""Minimal static SVG line plots (800x600 viewBox, linear axes)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

W, H = 800, 600
LEFT, RIGHT, TOP, BOTTOM = 95, 30, 50, 70
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
MAX_POINTS = 2000


def _ticks(lo, hi, n=6):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / (n - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _fmt(v):
    return "0" if v == 0 else f"{v:.2e}"


def line_plot(path, series, title="", xlabel="", ylabel="", hlines=(), vlines=()):
    """Write an SVG with ``series = [(x, y, label), ...]``.

    ``hlines``/``vlines`` are ``(value, label)`` reference lines.
    """
    xs = [np.asarray(s[0], dtype=float) for s in series]
    ys = [np.asarray(s[1], dtype=float) for s in series]
    xlo = min(float(x.min()) for x in xs)
    xhi = max(float(x.max()) for x in xs)
    ylo = min([float(np.nanmin(y)) for y in ys] + [v for v, _ in hlines])
    yhi = max([float(np.nanmax(y)) for y in ys] + [v for v, _ in hlines])
    for v, _ in vlines:
        xlo, xhi = min(xlo, v), max(xhi, v)
    if yhi == ylo:
        yhi, ylo = yhi + 1, ylo - 1
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return TOP + (yhi - v) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="28" font-size="18" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{LEFT + pw / 2}" y="{H - 20}" font-size="14" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="20" y="{TOP + ph / 2}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 20 {TOP + ph / 2})">{escape(ylabel)}</text>',
    ]
    for t in _ticks(xlo, xhi):
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{TOP + ph}" x2="{X:.2f}" y2="{TOP + ph + 6}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{TOP + ph + 22}" font-size="12" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        Y = sy(t)
        out.append(f'<line x1="{LEFT - 6}" y1="{Y:.2f}" x2="{LEFT}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 9}" y="{Y + 4:.2f}" font-size="12" text-anchor="end">{_fmt(t)}</text>')
    for v, label in hlines:
        Y = sy(v)
        out.append(f'<line x1="{LEFT}" y1="{Y:.2f}" x2="{LEFT + pw}" y2="{Y:.2f}" stroke="gray" stroke-dasharray="6,4"/>')
        if label:
            out.append(f'<text x="{LEFT + pw - 4}" y="{Y - 4:.2f}" font-size="11" text-anchor="end" fill="gray">{escape(label)}</text>')
    for v, label in vlines:
        X = sx(v)
        out.append(f'<line x1="{X:.2f}" y1="{TOP}" x2="{X:.2f}" y2="{TOP + ph}" stroke="gray" stroke-dasharray="2,3"/>')
        if label:
            out.append(f'<text x="{X + 4:.2f}" y="{TOP + 14}" font-size="11" fill="gray">{escape(label)}</text>')
    for i, (x, y, label) in enumerate(zip(xs, ys, (s[2] for s in series))):
        stride = max(1, x.size // MAX_POINTS)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[::stride], y[::stride]) if np.isfinite(b))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{LEFT + 10}" y="{TOP + 18 + 16 * i}" font-size="12" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
