"""Static SVG line charts, written directly as text."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

W, H = 640, 420
PAD_L, PAD_R, PAD_T, PAD_B = 70, 20, 40, 55
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-12:
        out.append(round(v, 12))
        v += step
    return out


def line_chart(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    errors: Sequence[Sequence[float] | None] | None = None,
) -> str:
    """Render ``(label, xs, ys)`` series as an SVG document; optional error bars."""
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    if errors:
        ys += [y + e for (_, _, sy), es in zip(series, errors) if es for y, e in zip(sy, es)]
        ys += [y - e for (_, _, sy), es in zip(series, errors) if es for y, e in zip(sy, es)]
    if not xs:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys + [0.0]), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y1 = y0 + 1
    y1 += 0.05 * (y1 - y0)
    pw, ph = W - PAD_L - PAD_R, H - PAD_T - PAD_B
    px = lambda x: PAD_L + (x - x0) / (x1 - x0) * pw
    py = lambda y: PAD_T + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{PAD_L}" y1="{PAD_T + ph}" x2="{PAD_L + pw}" y2="{PAD_T + ph}" stroke="black"/>',
        f'<line x1="{PAD_L}" y1="{PAD_T}" x2="{PAD_L}" y2="{PAD_T + ph}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.1f}" y1="{PAD_T + ph}" x2="{px(t):.1f}" y2="{PAD_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.1f}" y="{PAD_T + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{PAD_L - 5}" y1="{py(t):.1f}" x2="{PAD_L}" y2="{py(t):.1f}" stroke="black"/>')
        out.append(f'<line x1="{PAD_L}" y1="{py(t):.1f}" x2="{PAD_L + pw}" y2="{py(t):.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{PAD_L - 8}" y="{py(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{PAD_L + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{PAD_T + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {PAD_T + ph / 2})">{escape(ylabel)}</text>'
    )
    for i, (label, sx, sy) in enumerate(series):
        c = COLORS[i % len(COLORS)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>')
        es = errors[i] if errors and i < len(errors) else None
        for j, (x, y) in enumerate(zip(sx, sy)):
            out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3.5" fill="{c}"/>')
            if es:
                out.append(
                    f'<line x1="{px(x):.1f}" y1="{py(y - es[j]):.1f}" x2="{px(x):.1f}" y2="{py(y + es[j]):.1f}" stroke="{c}"/>'
                )
        out.append(f'<text x="{PAD_L + 10}" y="{PAD_T + 16 + 16 * i}" fill="{c}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
