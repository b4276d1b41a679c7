"""A very small SVG line-chart writer. Output bytes depend only on the inputs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class Line:
    label: str
    y: Sequence[float]
    dashed: bool = False


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(round(v, 10))
        v += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(x_labels: Sequence[str], lines: Sequence[Line], title: str = "", y_label: str = "",
               width: int = 720, height: int = 360) -> str:
    """Polylines over a shared categorical x axis. NaN values break a line."""
    left, right, top, bottom = 64, 150, 32, 56
    pw, ph = width - left - right, height - top - bottom
    vals = [v for ln in lines for v in ln.y if v is not None and math.isfinite(v)]
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    n = max(len(x_labels), 2)

    def sx(i: int) -> float:
        return left + pw * i / (n - 1)

    def sy(v: float) -> float:
        return top + ph * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    for t in _ticks(lo, hi):
        y = sy(t)
        out.append(f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">{t:g}</text>')
    every = max(1, math.ceil(len(x_labels) / 12))
    for i, lab in enumerate(x_labels):
        if i % every:
            continue
        x = sx(i)
        out.append(f'<line x1="{_fmt(x)}" y1="{top + ph}" x2="{_fmt(x)}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{top + ph + 16}" text-anchor="middle">{escape(lab)}</text>')
    if y_label:
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(y_label)}</text>')
    for k, ln in enumerate(lines):
        color = PALETTE[k % len(PALETTE)]
        dash = ' stroke-dasharray="5,3"' if ln.dashed else ""
        seg: list[str] = []
        for i, v in enumerate(ln.y):
            if v is None or not math.isfinite(v):
                if len(seg) > 1:
                    out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{" ".join(seg)}"/>')
                seg = []
                continue
            seg.append(f"{_fmt(sx(i))},{_fmt(sy(v))}")
        if len(seg) > 1:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{" ".join(seg)}"/>')
        ly = top + 14 * k + 8
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 22}" y="{ly + 4}">{escape(ln.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path: str | Path, *args, **kwargs) -> None:
    Path(path).write_text(line_chart(*args, **kwargs), encoding="utf-8")
