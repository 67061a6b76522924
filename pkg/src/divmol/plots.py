"""Minimal SVG charts: polylines for reward curves and box glyphs for metric spreads."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT = 640, 360
MARGIN = 48


def _frame(title: str, lo: float, hi: float) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        y = HEIGHT - MARGIN - frac * (HEIGHT - 2 * MARGIN)
        parts.append(f'<text x="{MARGIN - 4}" y="{y + 4:.1f}" text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{lo + frac * (hi - lo):.3g}</text>')
    return parts


def _range(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return 0.0, 1.0
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _y(v: float, lo: float, hi: float) -> float:
    return HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2 * MARGIN)


def _legend(labels: Sequence[str]) -> list[str]:
    out = []
    for k, label in enumerate(labels):
        y = MARGIN + 14 * k
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<rect x="{WIDTH - MARGIN - 110}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 96}" y="{y + 1}" font-family="sans-serif" '
                   f'font-size="10">{escape(label)}</text>')
    return out


def line_chart(series: Mapping[str, Sequence[float]], title: str = "") -> str:
    arrays = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    allv = np.concatenate([a for a in arrays.values()]) if arrays else np.zeros(0)
    lo, hi = _range(allv)
    n = max((len(a) for a in arrays.values()), default=1)
    parts = _frame(title, lo, hi)
    for k, (label, a) in enumerate(arrays.items()):
        if len(a) == 0:
            continue
        xs = MARGIN + np.arange(len(a)) / max(n - 1, 1) * (WIDTH - 2 * MARGIN)
        pts = " ".join(f"{x:.1f},{_y(v, lo, hi):.1f}" for x, v in zip(xs, a))
        parts.append(f'<polyline fill="none" stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="1.5" points="{pts}"/>')
    parts += _legend(list(arrays))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def box_chart(groups: Mapping[str, Sequence[float]], title: str = "") -> str:
    arrays = {k: np.asarray(v, dtype=float) for k, v in groups.items()}
    allv = np.concatenate([a for a in arrays.values()]) if arrays else np.zeros(0)
    lo, hi = _range(allv)
    parts = _frame(title, lo, hi)
    slot = (WIDTH - 2 * MARGIN) / max(len(arrays), 1)
    for k, (label, a) in enumerate(arrays.items()):
        if len(a) == 0:
            continue
        cx = MARGIN + slot * (k + 0.5)
        half = min(24.0, slot / 3)
        q1, med, q3 = np.percentile(a, [25, 50, 75])
        color = PALETTE[k % len(PALETTE)]
        parts.append(f'<line x1="{cx:.1f}" y1="{_y(a.min(), lo, hi):.1f}" x2="{cx:.1f}" '
                     f'y2="{_y(a.max(), lo, hi):.1f}" stroke="{color}"/>')
        parts.append(f'<rect x="{cx - half:.1f}" y="{_y(q3, lo, hi):.1f}" width="{2 * half:.1f}" '
                     f'height="{max(_y(q1, lo, hi) - _y(q3, lo, hi), 1):.1f}" fill="white" stroke="{color}"/>')
        parts.append(f'<line x1="{cx - half:.1f}" y1="{_y(med, lo, hi):.1f}" x2="{cx + half:.1f}" '
                     f'y2="{_y(med, lo, hi):.1f}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{cx:.1f}" y="{HEIGHT - MARGIN + 14}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
