"""Native SVG scatter/contour output for the 2-d synthetic experiment.

Contours are iso-lines of the grid log-posterior at the log-density
levels whose superlevel sets hold {0.5, 0.9, 0.99} of the grid mass,
extracted with marching squares. No plotting dependency: the SVG is
assembled directly, which keeps the output diffable in tests.
"""
from __future__ import annotations

import numpy as np

from opvi.core import ConfigError

_CANVAS = 640
_MARGIN = 40
_COLORS = ["#1f3b73", "#3c6fb5", "#8fb3e0"]


def marching_squares(values: np.ndarray, xs: np.ndarray, ys: np.ndarray, level: float):
    """Line segments ((x0, y0), (x1, y1)) of the iso-contour at the given level.

    values[i, j] is the field at (xs[i], ys[j]); linear interpolation
    along cell edges, saddle cells split by the cell-center average.
    """
    segs = []
    ni, nj = values.shape

    def interp(pa, pb, va, vb):
        frac = (level - va) / (vb - va)
        return (pa[0] + frac * (pb[0] - pa[0]), pa[1] + frac * (pb[1] - pa[1]))

    for i in range(ni - 1):
        for j in range(nj - 1):
            v00, v10 = values[i, j], values[i + 1, j]
            v01, v11 = values[i, j + 1], values[i + 1, j + 1]
            idx = (v00 > level) | ((v10 > level) << 1) | ((v11 > level) << 2) | ((v01 > level) << 3)
            if idx in (0, 15):
                continue
            p00, p10 = (xs[i], ys[j]), (xs[i + 1], ys[j])
            p01, p11 = (xs[i], ys[j + 1]), (xs[i + 1], ys[j + 1])
            bottom = lambda: interp(p00, p10, v00, v10)
            right = lambda: interp(p10, p11, v10, v11)
            top = lambda: interp(p01, p11, v01, v11)
            left = lambda: interp(p00, p01, v00, v01)
            table = {
                1: [(left, bottom)], 2: [(bottom, right)], 3: [(left, right)],
                4: [(right, top)], 5: None, 6: [(bottom, top)], 7: [(left, top)],
                8: [(top, left)], 9: [(bottom, top)], 10: None, 11: [(right, top)],
                12: [(right, left)], 13: [(bottom, right)], 14: [(left, bottom)],
            }
            entry = table[idx]
            if entry is None:  # saddle: disambiguate by the center value
                center_above = 0.25 * (v00 + v10 + v01 + v11) > level
                if idx == 5:
                    entry = [(left, top), (bottom, right)] if center_above \
                        else [(left, bottom), (right, top)]
                else:
                    entry = [(bottom, left), (top, right)] if center_above \
                        else [(bottom, right), (top, left)]
            for ea, eb in entry:
                segs.append((ea(), eb()))
    return segs


def _to_canvas(x, y, window):
    (x0, x1), (y0, y1) = window
    px = _MARGIN + (x - x0) / (x1 - x0) * (_CANVAS - 2 * _MARGIN)
    py = _CANVAS - _MARGIN - (y - y0) / (y1 - y0) * (_CANVAS - 2 * _MARGIN)
    return px, py


def emit_scatter_svg(ensemble, grid, path: str,
                     quantiles=(0.5, 0.9, 0.99)) -> str:
    """Write contour + particle SVG for a 2-d ensemble; returns the path."""
    if ensemble.dim != 2:
        raise ConfigError(f"scatter plot needs a 2-d ensemble, got dim={ensemble.dim}")
    window = (
        (float(grid.theta1[0]), float(grid.theta1[-1])),
        (float(grid.theta2[0]), float(grid.theta2[-1])),
    )
    levels = grid.density_quantile_levels(quantiles)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CANVAS}" height="{_CANVAS}" '
        f'viewBox="0 0 {_CANVAS} {_CANVAS}">',
        f'<rect width="{_CANVAS}" height="{_CANVAS}" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_CANVAS - 2 * _MARGIN}" '
        f'height="{_CANVAS - 2 * _MARGIN}" fill="none" stroke="#444"/>',
    ]
    for level, color in zip(levels, _COLORS):
        segs = marching_squares(grid.log_post, grid.theta1, grid.theta2, level)
        for (xa, ya), (xb, yb) in segs:
            pa = _to_canvas(xa, ya, window)
            pb = _to_canvas(xb, yb, window)
            parts.append(
                f'<line x1="{pa[0]:.2f}" y1="{pa[1]:.2f}" x2="{pb[0]:.2f}" y2="{pb[1]:.2f}" '
                f'stroke="{color}" stroke-width="1"/>'
            )
    for x, y in ensemble.positions:
        px, py = _to_canvas(float(x), float(y), window)
        parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" fill="#c0392b" '
                     f'fill-opacity="0.7" class="particle"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
    return path
