"""Native SVG line plots for profiles and experiment margins.  The
output is plain string assembly with fixed precision, so identical
inputs render byte-identical documents."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

__all__ = ["render_line_plot", "render_margin_plot"]

_PALETTE = ("#1f6fb4", "#c23b22", "#2e8540", "#7d4ca0", "#b8860b",
            "#3aa6a6", "#8a5a44", "#5b5b5b")
_MARGIN = {"left": 66.0, "right": 18.0, "top": 40.0, "bottom": 48.0}


def _num(x: float) -> str:
    return format(float(x), ".6g")


def _bounds(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        raise ValueError("plot data contains no finite values")
    lo = float(np.min(finite))
    hi = float(np.max(finite))
    if hi == lo:
        pad = abs(hi) if hi != 0.0 else 1.0
        return lo - 0.5 * pad, hi + 0.5 * pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _escape(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def render_line_plot(series: Sequence[tuple], *, title: str = "",
                     x_label: str = "", y_label: str = "",
                     width: int = 720, height: int = 460,
                     zero_line: bool = False) -> str:
    """Render labelled (xs, ys) series as polylines with linear axes.

    ``series`` holds (label, xs, ys) triples; each series keeps its
    palette slot, so colors are stable across runs.
    """
    if not series:
        raise ValueError("need at least one series")
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    if xs_all.size == 0:
        raise ValueError("series contain no points")
    x_lo, x_hi = _bounds(xs_all)
    y_lo, y_hi = _bounds(ys_all)
    if zero_line:
        y_lo, y_hi = min(y_lo, 0.0), max(y_hi, 0.0)

    plot_w = width - _MARGIN["left"] - _MARGIN["right"]
    plot_h = height - _MARGIN["top"] - _MARGIN["bottom"]

    def sx(x: float) -> float:
        return _MARGIN["left"] + plot_w * (x - x_lo) / (x_hi - x_lo)

    def sy(y: float) -> float:
        return _MARGIN["top"] + plot_h * (y_hi - y) / (y_hi - y_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<rect x="{_num(_MARGIN["left"])}" y="{_num(_MARGIN["top"])}" '
        f'width="{_num(plot_w)}" height="{_num(plot_h)}" fill="none" '
        f'stroke="#444444" stroke-width="1"/>',
    ]
    if title:
        out.append(
            f'<text x="{_num(width / 2)}" y="24" font-family="monospace" '
            f'font-size="14" text-anchor="middle">{_escape(title)}</text>')

    for tick in np.linspace(x_lo, x_hi, 5):
        px = sx(tick)
        out.append(
            f'<line x1="{_num(px)}" y1="{_num(_MARGIN["top"] + plot_h)}" '
            f'x2="{_num(px)}" y2="{_num(_MARGIN["top"] + plot_h + 5)}" '
            f'stroke="#444444" stroke-width="1"/>')
        out.append(
            f'<text x="{_num(px)}" y="{_num(_MARGIN["top"] + plot_h + 18)}" '
            f'font-family="monospace" font-size="10" '
            f'text-anchor="middle">{format(tick, ".4g")}</text>')
    for tick in np.linspace(y_lo, y_hi, 5):
        py = sy(tick)
        out.append(
            f'<line x1="{_num(_MARGIN["left"] - 5)}" y1="{_num(py)}" '
            f'x2="{_num(_MARGIN["left"])}" y2="{_num(py)}" '
            f'stroke="#444444" stroke-width="1"/>')
        out.append(
            f'<text x="{_num(_MARGIN["left"] - 8)}" y="{_num(py + 3)}" '
            f'font-family="monospace" font-size="10" '
            f'text-anchor="end">{format(tick, ".4g")}</text>')
    if x_label:
        out.append(
            f'<text x="{_num(_MARGIN["left"] + plot_w / 2)}" '
            f'y="{_num(height - 10)}" font-family="monospace" '
            f'font-size="11" text-anchor="middle">{_escape(x_label)}</text>')
    if y_label:
        cx, cy = 16.0, _MARGIN["top"] + plot_h / 2
        out.append(
            f'<text x="{_num(cx)}" y="{_num(cy)}" font-family="monospace" '
            f'font-size="11" text-anchor="middle" '
            f'transform="rotate(-90 {_num(cx)} {_num(cy)})">'
            f'{_escape(y_label)}</text>')
    if zero_line and y_lo < 0.0 < y_hi:
        py = sy(0.0)
        out.append(
            f'<line x1="{_num(_MARGIN["left"])}" y1="{_num(py)}" '
            f'x2="{_num(_MARGIN["left"] + plot_w)}" y2="{_num(py)}" '
            f'stroke="#999999" stroke-width="1" stroke-dasharray="4 3"/>')

    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        pts = " ".join(f"{_num(sx(x))},{_num(sy(y))}"
                       for x, y in zip(xs[keep], ys[keep]))
        if pts:
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>')
        ly = _MARGIN["top"] + 14 + 14 * idx
        lx = _MARGIN["left"] + plot_w - 10
        out.append(
            f'<line x1="{_num(lx - 26)}" y1="{_num(ly - 4)}" '
            f'x2="{_num(lx - 8)}" y2="{_num(ly - 4)}" stroke="{color}" '
            f'stroke-width="1.5"/>')
        out.append(
            f'<text x="{_num(lx - 30)}" y="{_num(ly)}" '
            f'font-family="monospace" font-size="10" '
            f'text-anchor="end">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_margin_plot(report) -> str:
    """Inequality margins for one scenario, base against refined, over
    the report's row order."""
    rows = report.margins
    if not rows:
        return render_line_plot(
            [("no margin rows", [0.0, 1.0], [0.0, 0.0])],
            title=f"{report.scenario}: {report.verdict.value}",
            x_label="row", y_label="margin", zero_line=True)
    idx = list(range(len(rows)))
    return render_line_plot(
        [
            ("base", idx, [m.margin for m in rows]),
            ("refined", idx, [m.refined_margin for m in rows]),
        ],
        title=f"{report.scenario}: {report.verdict.value}",
        x_label="row index", y_label="margin (rhs - lhs)",
        zero_line=True)
