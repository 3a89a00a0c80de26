"""Tiny deterministic SVG emitters for run artifacts.

Hand-rolled on purpose: the outputs are a handful of primitives and must
be byte-stable across reruns, which rules out plotting stacks that embed
timestamps or font metrics.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SvgCanvas", "heatmap_svg", "curves_svg"]


class SvgCanvas:
    """World-coordinate drawing surface mapped onto a square viewport."""

    def __init__(self, width: int, height: int, world: tuple[float, float]):
        self.width = width
        self.height = height
        self.lo, self.hi = world
        self.parts: list[str] = []

    def _x(self, x: float) -> float:
        return (x - self.lo) / (self.hi - self.lo) * self.width

    def _y(self, y: float) -> float:
        return self.height - (y - self.lo) / (self.hi - self.lo) * self.height

    def _s(self, length: float) -> float:
        return length / (self.hi - self.lo) * self.width

    def circle(self, x, y, r, fill="#000", stroke="none"):
        self.parts.append(
            f'<circle cx="{self._x(x):.2f}" cy="{self._y(y):.2f}" '
            f'r="{self._s(r):.2f}" fill="{fill}" stroke="{stroke}"/>')

    def rect(self, x, y, w, h, fill="#000", stroke="none"):
        self.parts.append(
            f'<rect x="{self._x(x):.2f}" y="{self._y(y + h):.2f}" '
            f'width="{self._s(w):.2f}" height="{self._s(h):.2f}" '
            f'fill="{fill}" stroke="{stroke}"/>')

    def polyline(self, points, stroke="#000", width=0.01):
        pts = " ".join(f"{self._x(x):.2f},{self._y(y):.2f}" for x, y in points)
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{self._s(width):.2f}"/>')

    def text(self, x, y, s, size=12, fill="#000", anchor="start"):
        self.parts.append(
            f'<text x="{self._x(x):.2f}" y="{self._y(y):.2f}" '
            f'font-size="{size}" fill="{fill}" text-anchor="{anchor}" '
            f'font-family="monospace">{s}</text>')

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">\n'
                f'<rect width="100%" height="100%" fill="#ffffff"/>\n'
                f"{body}\n</svg>\n")

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def heatmap_svg(matrix, path, labels=None, title="", cell: int = 48) -> None:
    """Square heatmap with per-cell values, blue (low) to red (high)."""
    m = np.asarray(matrix, dtype=np.float64)
    n = m.shape[0]
    pad = 60
    size = n * cell + 2 * pad
    lo, hi = float(m.min()), float(m.max())
    span = (hi - lo) or 1.0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">',
             '<rect width="100%" height="100%" fill="#ffffff"/>']
    if title:
        parts.append(f'<text x="{size / 2:.0f}" y="24" font-size="14" '
                     f'text-anchor="middle" font-family="monospace">{title}</text>')
    for i in range(n):
        for j in range(n):
            frac = (m[i, j] - lo) / span
            r = int(60 + 180 * frac)
            b = int(240 - 180 * frac)
            x, y = pad + j * cell, pad + i * cell
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="rgb({r},90,{b})" stroke="#fff"/>')
            parts.append(f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" '
                         f'font-size="10" fill="#fff" text-anchor="middle" '
                         f'font-family="monospace">{m[i, j]:.1f}</text>')
    names = labels or [str(i + 1) for i in range(n)]
    for k, name in enumerate(names):
        parts.append(f'<text x="{pad + k * cell + cell / 2:.0f}" y="{pad - 8}" '
                     f'font-size="11" text-anchor="middle" '
                     f'font-family="monospace">{name}</text>')
        parts.append(f'<text x="{pad - 8}" y="{pad + k * cell + cell / 2 + 4:.0f}" '
                     f'font-size="11" text-anchor="end" '
                     f'font-family="monospace">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def curves_svg(series, path, title="", xlabel="", ylabel="",
               width: int = 520, height: int = 360) -> None:
    """Line chart for a list of (label, xs, ys) series."""
    pad = 56
    palette = ["#cc3333", "#3366cc", "#33aa55", "#aa7722", "#8844aa", "#448888"]
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    if not all_x:
        all_x, all_y = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(all_x), max(all_x)
    y0, y1 = min(all_y), max(all_y)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             '<rect width="100%" height="100%" fill="#ffffff"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
             f'y2="{height - pad}" stroke="#333"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
             f'stroke="#333"/>']
    if title:
        parts.append(f'<text x="{width / 2:.0f}" y="22" font-size="14" '
                     f'text-anchor="middle" font-family="monospace">{title}</text>')
    if xlabel:
        parts.append(f'<text x="{width / 2:.0f}" y="{height - 12}" font-size="11" '
                     f'text-anchor="middle" font-family="monospace">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{height / 2:.0f}" font-size="11" '
                     f'text-anchor="middle" font-family="monospace" '
                     f'transform="rotate(-90 16 {height / 2:.0f})">{ylabel}</text>')
    for lo, txt in ((x0, f"{x0:g}"), (x1, f"{x1:g}")):
        parts.append(f'<text x="{px(lo):.0f}" y="{height - pad + 16}" font-size="10" '
                     f'text-anchor="middle" font-family="monospace">{txt}</text>')
    for lo, txt in ((y0, f"{y0:g}"), (y1, f"{y1:g}")):
        parts.append(f'<text x="{pad - 6}" y="{py(lo) + 4:.0f}" font-size="10" '
                     f'text-anchor="end" font-family="monospace">{txt}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = palette[k % len(palette)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{width - pad + 4}" y="{pad + 16 * k + 10}" '
                     f'font-size="11" fill="{color}" '
                     f'font-family="monospace" text-anchor="end">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
