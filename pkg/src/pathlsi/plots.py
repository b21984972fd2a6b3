"""Minimal self-contained SVG line and bar charts."""
from __future__ import annotations

from typing import Dict, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

_W, _H, _PAD = 640, 400, 60
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _frame(title, xlabel, ylabel, body, ylo, yhi, xlo=None, xhi=None):
    head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
            f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
            f'<text x="{_W / 2}" y="{_H - 18}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="18" y="{_H / 2}" text-anchor="middle" '
            f'transform="rotate(-90 18 {_H / 2})">{escape(ylabel)}</text>',
            f'<text x="{_PAD - 6}" y="{_H - _PAD}" text-anchor="end">{ylo:.4g}</text>',
            f'<text x="{_PAD - 6}" y="{_PAD + 4}" text-anchor="end">{yhi:.4g}</text>']
    if xlo is not None:
        head += [f'<text x="{_PAD}" y="{_H - _PAD + 16}" text-anchor="middle">{xlo:.4g}</text>',
                 f'<text x="{_W - _PAD}" y="{_H - _PAD + 16}" text-anchor="middle">{xhi:.4g}</text>']
    return "\n".join(head + body + ["</svg>", ""])


def _range(lo, hi):
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi - lo < 1e-12:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def line_chart(series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
               title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    xlo, xhi = float(xs.min()), float(xs.max())
    if xhi == xlo:
        xhi = xlo + 1.0
    ylo, yhi = _range(float(ys.min()), float(ys.max()))
    sx = lambda x: _PAD + (x - xlo) / (xhi - xlo) * (_W - 2 * _PAD)
    sy = lambda y: _H - _PAD - (y - ylo) / (yhi - ylo) * (_H - 2 * _PAD)
    body = []
    for i, (label, (x, y)) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{pts}"/>')
        body.append(f'<text x="{_W - _PAD + 4 - 120}" y="{_PAD + 16 * i}" fill="{color}">'
                    f'{escape(label)}</text>')
    return _frame(title, xlabel, ylabel, body, ylo, yhi, xlo, xhi)


def bar_chart(bars: Dict[str, Tuple[float, float]], title: str = "", ylabel: str = "") -> str:
    """Bars with +-3 standard-error whiskers; ``bars`` maps label to ``(value, se)``."""
    vals = [(v - 3 * s, v + 3 * s) for v, s in bars.values()]
    ylo, yhi = _range(min(0.0, min(a for a, _ in vals)), max(b for _, b in vals))
    sy = lambda y: _H - _PAD - (y - ylo) / (yhi - ylo) * (_H - 2 * _PAD)
    width = (_W - 2 * _PAD) / max(len(bars), 1)
    body = []
    for i, (label, (v, s)) in enumerate(bars.items()):
        x0 = _PAD + i * width + 0.15 * width
        w = 0.7 * width
        top, base = sy(max(v, 0.0)), sy(min(v, 0.0))
        color = _COLORS[i % len(_COLORS)]
        body.append(f'<rect x="{x0:.2f}" y="{top:.2f}" width="{w:.2f}" '
                    f'height="{base - top:.2f}" fill="{color}" opacity="0.8"/>')
        cx = x0 + w / 2
        body.append(f'<line x1="{cx:.2f}" y1="{sy(v - 3 * s):.2f}" x2="{cx:.2f}" '
                    f'y2="{sy(v + 3 * s):.2f}" stroke="black"/>')
        body.append(f'<text x="{cx:.2f}" y="{_H - _PAD + 16}" text-anchor="middle">'
                    f'{escape(label)}</text>')
    return _frame(title, "", ylabel, body, ylo, yhi)
