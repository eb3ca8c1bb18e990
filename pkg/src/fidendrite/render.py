"""SVG output: cover cells as rectangles, arcs as polylines, clusters as circles.

Runs of occupied cells in a row are merged into one rectangle.  Numbers are
printed with a fixed number of decimals so output is reproducible.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .attractor import CellCover


def _runs(cells: np.ndarray):
    """Horizontal runs (x0, x1, y) of a lexicographically sorted cell array."""
    order = np.lexsort((cells[:, 0], cells[:, 1]))
    c = cells[order]
    runs = []
    start = prev = None
    for x, y in c.tolist():
        if prev is not None and y == prev[1] and x == prev[0] + 1:
            prev = (x, y)
            continue
        if prev is not None:
            runs.append((start[0], prev[0], prev[1]))
        start = prev = (x, y)
    if prev is not None:
        runs.append((start[0], prev[0], prev[1]))
    return runs


class _Frame:
    """Maps world coordinates to SVG pixels (y axis flipped)."""

    def __init__(self, xmin, ymin, xmax, ymax, size):
        span = max(xmax - xmin, ymax - ymin) or 1.0
        self.scale = size / span
        self.xmin, self.ymax = xmin, ymax
        self.width = (xmax - xmin) * self.scale
        self.height = (ymax - ymin) * self.scale

    def x(self, v):
        return (v - self.xmin) * self.scale

    def y(self, v):
        return (self.ymax - v) * self.scale


def _f(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _frame_for(cover: CellCover | None, extra: Sequence[complex], size: float, margin: float = 0.02):
    xs, ys = [], []
    if cover is not None:
        x0, y0, x1, y1 = cover.bbox()
        h = cover.cell_size
        xs += [x0 * h, (x1 + 1) * h]
        ys += [y0 * h, (y1 + 1) * h]
    for z in extra:
        xs.append(z.real)
        ys.append(z.imag)
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    w = max(max(xs) - min(xs), max(ys) - min(ys)) or 1.0
    pad = margin * w
    return _Frame(min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad, size)


def _cells_group(cover: CellCover, fr: _Frame, fill: str) -> list[str]:
    h = cover.cell_size
    out = [f'<g fill="{fill}" stroke="none">']
    for x0, x1, y in _runs(cover.cells):
        out.append(
            f'<rect x="{_f(fr.x(x0 * h))}" y="{_f(fr.y((y + 1) * h))}" '
            f'width="{_f((x1 - x0 + 1) * h * fr.scale)}" height="{_f(h * fr.scale)}"/>'
        )
    out.append("</g>")
    return out


def _header(fr: _Frame) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(fr.width)}" height="{_f(fr.height)}" '
        f'viewBox="0 0 {_f(fr.width)} {_f(fr.height)}">',
    ]


def cover_svg(cover: CellCover, scale: float | None = None, fill: str = "#222", size: float = 600.0) -> str:
    """The cover alone.  ``scale`` (pixels per unit) overrides ``size``."""
    fr = _frame_for(cover, (), size)
    if scale is not None:
        fr = _frame_for(cover, (), size * scale / fr.scale)
    return "\n".join(_header(fr) + _cells_group(cover, fr, fill) + ["</svg>"]) + "\n"


def scene_svg(
    cover: CellCover | None,
    arcs: Iterable[Sequence[complex]] = (),
    clusters: Iterable[tuple[complex, float]] = (),
    size: float = 600.0,
    fill: str = "#bbb",
) -> str:
    """Cover with arc polylines and cluster circles drawn on top."""
    arcs = [np.asarray(a, dtype=complex) for a in arcs]
    clusters = list(clusters)
    extra = []
    for a in arcs:
        extra += [complex(a.real.min(), a.imag.min()), complex(a.real.max(), a.imag.max())]
    for c, _ in clusters:
        extra.append(c)
    fr = _frame_for(cover, extra, size)
    lines = _header(fr)
    if cover is not None:
        lines += _cells_group(cover, fr, fill)
    palette = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    for k, a in enumerate(arcs):
        pts = " ".join(f"{_f(fr.x(z.real))},{_f(fr.y(z.imag))}" for z in a)
        lines.append(f'<polyline fill="none" stroke="{palette[k % len(palette)]}" stroke-width="1.5" points="{pts}"/>')
    for c, r in clusters:
        rad = max(r * fr.scale, 3.0)
        lines.append(f'<circle cx="{_f(fr.x(c.real))}" cy="{_f(fr.y(c.imag))}" r="{_f(rad)}" '
                     f'fill="none" stroke="#000" stroke-width="1"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
