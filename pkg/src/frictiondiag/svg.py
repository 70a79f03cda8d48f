"""Minimal dependency-free SVG line, scatter and heatmap plots.

Every figure emitted by the benchmarks is also written as CSV; these renderings
are only a convenience preview. Output is deterministic (fixed number format).
"""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=130, top=40, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Axes:
    def __init__(self, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = (self._t(v, logx) for v in xlim)
        self.y0, self.y1 = (self._t(v, logy) for v in ylim)
        if self.x1 <= self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x0 + 0.5
        if self.y1 <= self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y0 + 0.5
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    @staticmethod
    def _t(v, log):
        return math.log10(v) if log else float(v)

    def px(self, x):
        return MARGIN["left"] + (self._t(x, self.logx) - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + self.ph - (self._t(y, self.logy) - self.y0) / (self.y1 - self.y0) * self.ph

    def ticks(self, axis, n=5):
        lo, hi, log = (self.x0, self.x1, self.logx) if axis == "x" else (self.y0, self.y1, self.logy)
        vals = np.linspace(lo, hi, n)
        return [(10.0 ** v if log else v) for v in vals]


def _fmt_tick(v: float) -> str:
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-2):
        return f"{v:.1e}"
    return f"{v:.3g}"


def _frame(ax: _Axes, title, xlabel, ylabel) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2 - MARGIN["right"] / 2:.0f}" y="22" text-anchor="middle" font-size="14">'
        f"{escape(title)}</text>",
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{ax.pw}" height="{ax.ph}" '
        f'fill="none" stroke="black"/>',
    ]
    ybase = MARGIN["top"] + ax.ph
    for v in ax.ticks("x"):
        x = ax.px(v)
        out.append(f'<line x1="{_f(x)}" y1="{ybase}" x2="{_f(x)}" y2="{ybase + 4}" stroke="black"/>')
        out.append(f'<text x="{_f(x)}" y="{ybase + 16}" text-anchor="middle">{_fmt_tick(v)}</text>')
    for v in ax.ticks("y"):
        y = ax.py(v)
        out.append(f'<line x1="{MARGIN["left"] - 4}" y1="{_f(y)}" x2="{MARGIN["left"]}" y2="{_f(y)}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{_f(y + 4)}" text-anchor="end">{_fmt_tick(v)}</text>')
    out.append(f'<text x="{MARGIN["left"] + ax.pw / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle">'
               f"{escape(xlabel)}</text>")
    out.append(f'<text x="16" y="{MARGIN["top"] + ax.ph / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ax.ph / 2:.0f})">{escape(ylabel)}</text>')
    return out


def _legend(names) -> list[str]:
    out = []
    x = WIDTH - MARGIN["right"] + 10
    for i, name in enumerate(names):
        y = MARGIN["top"] + 10 + 16 * i
        c = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{x}" y="{y - 8}" width="10" height="10" fill="{c}"/>')
        out.append(f'<text x="{x + 14}" y="{y + 1}">{escape(str(name))}</text>')
    return out


def _limits(arrays, log):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays]) if arrays else np.zeros(1)
    vals = vals[np.isfinite(vals)]
    if log:
        vals = vals[vals > 0]
    if vals.size == 0:
        return (1.0, 10.0) if log else (0.0, 1.0)
    return float(vals.min()), float(vals.max())


def line_plot(path, series: dict, title="", xlabel="", ylabel="", logx=False, logy=False,
              markers=False) -> None:
    """``series`` maps a legend name to ``(x, y)`` arrays. Non-finite points are skipped."""
    xs = [s[0] for s in series.values()]
    ys = [s[1] for s in series.values()]
    ax = _Axes(_limits(xs, logx), _limits(ys, logy), logx, logy)
    out = _frame(ax, title, xlabel, ylabel)
    for i, (x, y) in enumerate(series.values()):
        c = PALETTE[i % len(PALETTE)]
        pts = [(a, b) for a, b in zip(np.asarray(x, float), np.asarray(y, float))
               if np.isfinite(a) and np.isfinite(b) and (not logx or a > 0) and (not logy or b > 0)]
        if len(pts) > 1:
            d = " ".join(f"{_f(ax.px(a))},{_f(ax.py(b))}" for a, b in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        if markers or len(pts) == 1:
            out += [f'<circle cx="{_f(ax.px(a))}" cy="{_f(ax.py(b))}" r="2.5" fill="{c}"/>' for a, b in pts]
    out += _legend(series.keys())
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def scatter_plot(path, series: dict, title="", xlabel="", ylabel="", logx=False, logy=False) -> None:
    xs = [s[0] for s in series.values()]
    ys = [s[1] for s in series.values()]
    ax = _Axes(_limits(xs, logx), _limits(ys, logy), logx, logy)
    out = _frame(ax, title, xlabel, ylabel)
    for i, (x, y) in enumerate(series.values()):
        c = PALETTE[i % len(PALETTE)]
        for a, b in zip(np.asarray(x, float), np.asarray(y, float)):
            if np.isfinite(a) and np.isfinite(b) and (not logx or a > 0) and (not logy or b > 0):
                out.append(f'<circle cx="{_f(ax.px(a))}" cy="{_f(ax.py(b))}" r="2" fill="{c}" fill-opacity="0.6"/>')
    out += _legend(series.keys())
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def heatmap(path, matrix, row_labels, col_labels, title="", vmin=0.0, vmax=1.0, annotate=True) -> None:
    """Grey-to-blue heatmap with optional cell annotations."""
    m = np.asarray(matrix, dtype=float)
    nr, nc = m.shape
    left, top = 90, 50
    cw = (WIDTH - left - 30) / max(nc, 1)
    ch = (HEIGHT - top - 30) / max(nr, 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    span = vmax - vmin if vmax > vmin else 1.0
    for i in range(nr):
        for j in range(nc):
            v = m[i, j]
            t = 0.0 if not np.isfinite(v) else min(max((v - vmin) / span, 0.0), 1.0)
            r, g, b = (int(round(240 - t * (240 - a))) for a in (31, 119, 180))
            x, y = left + j * cw, top + i * ch
            out.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(cw)}" height="{_f(ch)}" '
                       f'fill="rgb({r},{g},{b})" stroke="white"/>')
            if annotate and np.isfinite(v):
                col = "white" if t > 0.6 else "black"
                out.append(f'<text x="{_f(x + cw / 2)}" y="{_f(y + ch / 2 + 4)}" text-anchor="middle" '
                           f'fill="{col}">{v:.2f}</text>')
    for j, name in enumerate(col_labels):
        out.append(f'<text x="{_f(left + (j + 0.5) * cw)}" y="{top - 6}" text-anchor="middle">{escape(str(name))}</text>')
    for i, name in enumerate(row_labels):
        out.append(f'<text x="{left - 6}" y="{_f(top + (i + 0.5) * ch + 4)}" text-anchor="end">{escape(str(name))}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
