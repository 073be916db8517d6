"""Deterministic SVG renderings of run results.

Hand-assembled SVG: the same result always produces the same bytes, which
keeps plot artifacts comparable across reruns. No plotting library is
involved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .exceptions import InputError

# Qualitative palette (colorblind-friendly), cycled across penalties.
_PALETTE = (
    "#4e79a7",
    "#f28e2b",
    "#e15759",
    "#76b7b4",
    "#59a14f",
    "#edc948",
    "#b07aa1",
    "#ff9da7",
    "#9c755f",
    "#bab0ac",
)

_HEAT_DARK = (8, 48, 107)  # consensus 1.0; 0.0 renders white


def _fmt(value: float) -> str:
    return f"{value:.2f}".rstrip("0").rstrip(".")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    power = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * power
        if raw <= step:
            break
    start = np.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(float(t))
        t += step
    return ticks


def calibration_curve_svg(path, grid, selection=None) -> None:
    """Consensus score against cluster count, one polyline per penalty.

    Cells with no finite score leave gaps. The selected cell, when given,
    is circled.
    """
    width, height = 640.0, 420.0
    left, right, top, bottom = 62.0, 18.0, 30.0, 58.0
    plot_w, plot_h = width - left - right, height - top - bottom
    counts = np.asarray(grid.cluster_counts, dtype=np.float64)
    scores = np.asarray(grid.consensus, dtype=np.float64)
    finite = scores[np.isfinite(scores)]
    if finite.size == 0:
        y_lo, y_hi = 0.0, 1.0
    else:
        y_lo, y_hi = float(finite.min()), float(finite.max())
        if y_lo == y_hi:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        pad = 0.05 * (y_hi - y_lo)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = float(counts.min()), float(counts.max())
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    def sx(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return top + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(width)}"'
        f' height="{int(height)}" viewBox="0 0 {int(width)} {int(height)}">',
        f'<rect width="{int(width)}" height="{int(height)}" fill="white"/>',
        f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(plot_w)}"'
        f' height="{_fmt(plot_h)}" fill="none" stroke="#333333"/>',
    ]
    for t in _ticks(y_lo, y_hi):
        y = sy(t)
        parts.append(
            f'<line x1="{_fmt(left - 4)}" y1="{_fmt(y)}" x2="{_fmt(left)}"'
            f' y2="{_fmt(y)}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{_fmt(left - 8)}" y="{_fmt(y + 4)}" text-anchor="end"'
            f' font-family="sans-serif" font-size="11">{_fmt(t)}</text>'
        )
    step = max(1, int(np.ceil(counts.size / 12)))
    for idx in range(0, counts.size, step):
        x = sx(counts[idx])
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(top + plot_h)}" x2="{_fmt(x)}"'
            f' y2="{_fmt(top + plot_h + 4)}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(top + plot_h + 17)}"'
            f' text-anchor="middle" font-family="sans-serif"'
            f' font-size="11">{int(counts[idx])}</text>'
        )
    parts.append(
        f'<text x="{_fmt(left + plot_w / 2)}" y="{_fmt(height - 26)}"'
        f' text-anchor="middle" font-family="sans-serif" font-size="12">'
        "number of clusters</text>"
    )
    parts.append(
        f'<text x="14" y="{_fmt(top + plot_h / 2)}" text-anchor="middle"'
        f' font-family="sans-serif" font-size="12" transform="rotate(-90 14'
        f' {_fmt(top + plot_h / 2)})">consensus score</text>'
    )
    for li, penalty in enumerate(grid.penalties):
        color = _PALETTE[li % len(_PALETTE)]
        segment: list[str] = []
        for gi in range(counts.size):
            value = scores[li, gi]
            if np.isfinite(value):
                segment.append(f"{_fmt(sx(counts[gi]))},{_fmt(sy(value))}")
            elif segment:
                if len(segment) > 1:
                    parts.append(
                        f'<polyline points="{" ".join(segment)}" fill="none"'
                        f' stroke="{color}" stroke-width="1.5"/>'
                    )
                segment = []
        if len(segment) > 1:
            parts.append(
                f'<polyline points="{" ".join(segment)}" fill="none"'
                f' stroke="{color}" stroke-width="1.5"/>'
            )
    # legend, one swatch per penalty
    ly = top + 6
    for li, penalty in enumerate(grid.penalties):
        color = _PALETTE[li % len(_PALETTE)]
        parts.append(
            f'<rect x="{_fmt(left + plot_w - 110)}" y="{_fmt(ly - 8)}"'
            f' width="10" height="10" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_fmt(left + plot_w - 96)}" y="{_fmt(ly + 1)}"'
            f' font-family="sans-serif" font-size="10">penalty'
            f" {float(penalty):.4g}</text>"
        )
        ly += 13
    if selection is not None:
        x = sx(float(selection.n_clusters))
        y = sy(float(selection.value))
        parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="5" fill="none"'
            ' stroke="#d62728" stroke-width="2"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def _heat_color(value: float) -> str:
    level = min(max(value, 0.0), 1.0)
    rgb = tuple(int(round(255 + (c - 255) * level)) for c in _HEAT_DARK)
    return f"#{rgb[0]:02x}{rgb[1]:02x}{rgb[2]:02x}"


def consensus_heatmap_svg(path, gamma, labels) -> None:
    """Consensus proportions with items ordered by cluster label.

    Rows of equal colour are run-length merged, so blocky matrices stay
    small on disk. Cluster boundaries are drawn as dark lines.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    labels = np.asarray(labels)
    n = gamma.shape[0]
    if gamma.shape != (n, n) or labels.shape != (n,):
        raise InputError("gamma must be square with one label per item")
    order = np.argsort(labels, kind="stable")
    mat = gamma[np.ix_(order, order)]
    sorted_labels = labels[order]
    size = 600.0
    margin = 10.0
    cell = size / n
    # Quantize to 8-bit levels so adjacent equal cells merge into one rect.
    levels = np.clip(np.round(mat * 255).astype(np.int64), 0, 255)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(size + 2 * margin)}"'
        f' height="{int(size + 2 * margin)}" viewBox="0 0'
        f' {int(size + 2 * margin)} {int(size + 2 * margin)}">',
        f'<rect width="{int(size + 2 * margin)}" height="{int(size + 2 * margin)}"'
        ' fill="white"/>',
    ]
    for i in range(n):
        y = margin + i * cell
        j = 0
        while j < n:
            k = j
            while k + 1 < n and levels[i, k + 1] == levels[i, j]:
                k += 1
            if levels[i, j] > 0:
                x = margin + j * cell
                color = _heat_color(levels[i, j] / 255.0)
                parts.append(
                    f'<rect x="{_fmt(x)}" y="{_fmt(y)}"'
                    f' width="{_fmt((k - j + 1) * cell)}" height="{_fmt(cell)}"'
                    f' fill="{color}"/>'
                )
            j = k + 1
    boundaries = np.nonzero(np.diff(sorted_labels))[0] + 1
    for b in boundaries.tolist():
        pos = margin + b * cell
        parts.append(
            f'<line x1="{_fmt(margin)}" y1="{_fmt(pos)}"'
            f' x2="{_fmt(margin + size)}" y2="{_fmt(pos)}" stroke="#222222"'
            ' stroke-width="0.8"/>'
        )
        parts.append(
            f'<line x1="{_fmt(pos)}" y1="{_fmt(margin)}" x2="{_fmt(pos)}"'
            f' y2="{_fmt(margin + size)}" stroke="#222222" stroke-width="0.8"/>'
        )
    parts.append(
        f'<rect x="{_fmt(margin)}" y="{_fmt(margin)}" width="{_fmt(size)}"'
        f' height="{_fmt(size)}" fill="none" stroke="#333333"/>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
