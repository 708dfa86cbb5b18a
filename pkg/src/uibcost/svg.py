"""Dependency-free SVG line and scatter plots for CLI reports."""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

W, H = 640, 420
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf"]


class _Axes:
    def __init__(self, xs: Sequence[float], ys: Sequence[float], log_x: bool = False):
        self.log_x = log_x
        tx = [self._tx(x) for x in xs]
        self.x0, self.x1 = _pad(min(tx), max(tx))
        self.y0, self.y1 = _pad(min(ys), max(ys))

    def _tx(self, x: float) -> float:
        # log(1 + x) keeps a ridge point of 0 on a log-like axis
        return math.log10(1.0 + x) if self.log_x else x

    def px(self, x: float) -> float:
        l, r = MARGIN[0], W - MARGIN[1]
        return l + (self._tx(x) - self.x0) / (self.x1 - self.x0) * (r - l)

    def py(self, y: float) -> float:
        t, b = MARGIN[2], H - MARGIN[3]
        return b - (y - self.y0) / (self.y1 - self.y0) * (b - t)


def _pad(lo: float, hi: float) -> Tuple[float, float]:
    if hi == lo:
        return lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - 0.05 * span, hi + 0.05 * span


def _frame(title: str, xlabel: str, ylabel: str) -> List[str]:
    l, r, t, b = MARGIN[0], W - MARGIN[1], MARGIN[2], H - MARGIN[3]
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>',
        f'<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>',
        f'<text x="{(l + r) / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{(t + b) / 2}" text-anchor="middle" transform="rotate(-90 14 {(t + b) / 2})">{escape(ylabel)}</text>',
    ]


def _ticks(ax: _Axes, xticks: Iterable[float]) -> List[str]:
    out = []
    b = H - MARGIN[3]
    for x in xticks:
        px = ax.px(x)
        out.append(f'<line x1="{px:.1f}" y1="{b}" x2="{px:.1f}" y2="{b + 4}" stroke="black"/>')
        out.append(f'<text x="{px:.1f}" y="{b + 16}" text-anchor="middle">{x:g}</text>')
    for i in range(5):
        y = ax.y0 + (ax.y1 - ax.y0) * i / 4
        py = ax.py(y)
        out.append(f'<text x="{MARGIN[0] - 4}" y="{py + 4:.1f}" text-anchor="end">{y:.3g}</text>')
    return out


def line_plot(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    log_x: bool = False,
) -> str:
    all_x = [x for xs, _ in series.values() for x in xs]
    all_y = [y for _, ys in series.values() for y in ys]
    ax = _Axes(all_x, all_y, log_x)
    parts = _frame(title, xlabel, ylabel) + _ticks(ax, sorted(set(all_x)))
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{ax.px(x):.1f},{ax.py(y):.1f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{W - MARGIN[1] - 4}" y="{MARGIN[2] + 12 * (i + 1)}" text-anchor="end" fill="{color}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_plot(
    points: Sequence[Tuple[float, float, str]],
    highlight: Optional[Sequence[str]] = None,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Labelled scatter; points named in `highlight` are drawn in red and joined by a line."""
    ax = _Axes([p[0] for p in points], [p[1] for p in points])
    xt = sorted({round(ax.x0 + (ax.x1 - ax.x0) * i / 4, 3) for i in range(5)})
    parts = _frame(title, xlabel, ylabel) + _ticks(ax, xt)
    hl = set(highlight or ())
    for x, y, name in points:
        color = PALETTE[1] if name in hl else PALETTE[0]
        parts.append(f'<circle cx="{ax.px(x):.1f}" cy="{ax.py(y):.1f}" r="3.5" fill="{color}"/>')
        parts.append(f'<text x="{ax.px(x) + 5:.1f}" y="{ax.py(y) - 5:.1f}" font-size="9">{escape(name)}</text>')
    front = sorted((p for p in points if p[2] in hl), key=lambda p: p[0])
    if len(front) > 1:
        pts = " ".join(f"{ax.px(x):.1f},{ax.py(y):.1f}" for x, y, _ in front)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[1]}" stroke-dasharray="4 3"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
