"""Minimal self-contained SVG charts.

Hand-rolled on purpose: the outputs are plain text, byte-deterministic for
identical inputs, and diffable in CI, which no binary plotting backend
guarantees.  Only the two shapes the harness needs are provided (histogram
with an optional vertical marker, and a line chart).
"""
from __future__ import annotations

import numpy as np

__all__ = ["histogram_svg", "line_chart_svg"]

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 60, 20, 40, 50


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]


def _axes(xlabel: str, ylabel: str) -> list[str]:
    x0, y0 = _ML, _H - _MB
    x1, y1 = _W - _MR, _MT
    return [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{_H - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2})">{ylabel}</text>',
    ]


def _xticks(lo: float, hi: float) -> list[str]:
    parts = []
    y0 = _H - _MB
    for frac in (0.0, 0.5, 1.0):
        val = lo + frac * (hi - lo)
        px = _ML + frac * (_W - _ML - _MR)
        parts.append(
            f'<text x="{_fmt(px)}" y="{y0 + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{val:.4g}</text>'
        )
    return parts


def histogram_svg(
    values,
    bins: int = 24,
    marker: float | None = None,
    marker_label: str = "",
    title: str = "",
    xlabel: str = "",
) -> str:
    """Histogram of `values`; `marker` draws a labelled vertical line."""
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise ValueError("histogram needs at least one finite value")
    lo = float(values.min())
    hi = float(values.max())
    if marker is not None and np.isfinite(marker):
        lo = min(lo, float(marker))
        hi = max(hi, float(marker))
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    lo -= 0.02 * span
    hi += 0.02 * span
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    cmax = max(int(counts.max()), 1)
    plot_w = _W - _ML - _MR
    plot_h = _H - _MT - _MB

    parts = _header(title) + _axes(xlabel, "count") + _xticks(lo, hi)
    for i, c in enumerate(counts):
        if c == 0:
            continue
        x = _ML + plot_w * (edges[i] - lo) / (hi - lo)
        w = plot_w * (edges[i + 1] - edges[i]) / (hi - lo)
        h = plot_h * c / cmax
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(_H - _MB - h)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="#4878a8" stroke="white" stroke-width="0.5"/>'
        )
    if marker is not None and np.isfinite(marker):
        mx = _ML + plot_w * (marker - lo) / (hi - lo)
        parts.append(
            f'<line x1="{_fmt(mx)}" y1="{_MT}" x2="{_fmt(mx)}" y2="{_H - _MB}" '
            f'stroke="#c03028" stroke-width="1.5" stroke-dasharray="6 3"/>'
        )
        if marker_label:
            parts.append(
                f'<text x="{_fmt(mx + 4)}" y="{_MT + 14}" font-family="sans-serif" '
                f'font-size="11" fill="#c03028">{marker_label}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_chart_svg(xs, ys, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Single polyline through (xs, ys), sorted by x."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size != ys.size or xs.size == 0:
        raise ValueError("xs and ys must be non-empty and equal length")
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    xlo, xhi = float(xs.min()), float(xs.max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi <= xlo:
        xhi = xlo + 1.0
    if yhi <= ylo:
        yhi = ylo + 1.0
    plot_w = _W - _ML - _MR
    plot_h = _H - _MT - _MB
    pts = " ".join(
        f"{_fmt(_ML + plot_w * (x - xlo) / (xhi - xlo))},"
        f"{_fmt(_H - _MB - plot_h * (y - ylo) / (yhi - ylo))}"
        for x, y in zip(xs, ys)
    )
    parts = _header(title) + _axes(xlabel, ylabel) + _xticks(xlo, xhi)
    parts.append(
        f'<polyline points="{pts}" fill="none" stroke="#4878a8" stroke-width="2"/>'
    )
    for x, y in zip(xs, ys):
        px = _ML + plot_w * (x - xlo) / (xhi - xlo)
        py = _H - _MB - plot_h * (y - ylo) / (yhi - ylo)
        parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="#4878a8"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
