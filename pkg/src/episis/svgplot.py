"""Minimal deterministic SVG line charts (linear y, optional log x)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=40, bottom=50)
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def line_chart(series, title: str, xlabel: str, ylabel: str, logx: bool = True) -> str:
    """Render ``series`` (a list of ``(label, xs, ys)``) as an SVG document.

    With ``logx`` non-positive abscissae are dropped.  Non-finite ordinates
    break the polyline.
    """
    cleaned = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = xs > 0 if logx else np.ones(xs.shape, dtype=bool)
        cleaned.append((label, xs[keep], ys[keep]))
    all_x = np.concatenate([c[1] for c in cleaned]) if cleaned else np.array([])
    all_y = np.concatenate([c[2] for c in cleaned]) if cleaned else np.array([])
    all_y = all_y[np.isfinite(all_y)]
    if all_x.size == 0:
        all_x = np.array([1.0, 10.0])
    if all_y.size == 0:
        all_y = np.array([0.0, 1.0])

    fx = np.log10 if logx else (lambda v: v)
    x_lo, x_hi = float(fx(all_x.min())), float(fx(all_x.max()))
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    y_lo, y_hi = float(min(0.0, all_y.min())), float(all_y.max())
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    y_hi += 0.05 * (y_hi - y_lo)

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (fx(v) - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return MARGIN["top"] + ph - (v - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    if logx:
        xt = [10.0 ** k for k in range(math.ceil(x_lo), math.floor(x_hi) + 1)] or [10 ** x_lo]
    else:
        xt = _ticks(x_lo, x_hi)
    for t in xt:
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN["top"] + ph}" x2="{x:.2f}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{y:.2f}" x2="{MARGIN["left"]}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">'
               f'{escape(xlabel)}{" (log scale)" if logx else ""}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>')

    for k, (label, xs, ys) in enumerate(cleaned):
        color = PALETTE[k % len(PALETTE)]
        runs, cur = [], []
        for xv, yv in zip(xs, ys):
            if math.isfinite(yv):
                cur.append(f"{px(xv):.2f},{py(yv):.2f}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for pts in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        if len(cleaned) > 1 and k < 12:
            ly = MARGIN["top"] + 14 + 14 * k
            lx = MARGIN["left"] + pw - 90
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 16}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{lx + 20}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
