"""Deterministic SVG heatmaps of per-triangle scalar fields."""
from __future__ import annotations

import math

import numpy as np

# viridis-like ramp, interpolated linearly
_RAMP = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=float)


def _color(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0) * (len(_RAMP) - 1)
    i = np.minimum(np.floor(t).astype(int), len(_RAMP) - 2)
    f = (t - i)[:, None]
    rgb = _RAMP[i] * (1 - f) + _RAMP[i + 1] * f
    return np.rint(rgb).astype(int)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_svg(vertices: np.ndarray, triangles: np.ndarray, values: np.ndarray,
               title: str = "", scale: str = "log", width: int = 800) -> str:
    """One filled polygon per triangle, colored by ``values`` (one per triangle).

    ``scale="log"`` needs positive values; nonpositive entries are clamped to
    max*1e-6 for coloring only.  The legend reports the unclamped min and max.
    """
    values = np.asarray(values, dtype=float)
    if len(values) != len(triangles):
        raise ValueError("one value per triangle required")
    if len(triangles) == 0:
        raise ValueError("nothing to plot")
    vmin, vmax = float(values.min()), float(values.max())
    if scale == "log":
        if vmax <= 0:
            raise ValueError("log scale needs a positive maximum")
        floor = vmax * 1e-6
        lv = np.log10(np.maximum(values, floor))
        lo, hi = float(lv.min()), float(lv.max())
        t = (lv - lo) / (hi - lo) if hi > lo else np.zeros_like(lv)
    elif scale == "linear":
        t = (values - vmin) / (vmax - vmin) if vmax > vmin else np.zeros_like(values)
    else:
        raise ValueError(f"unknown color scale {scale!r}")
    rgb = _color(t)

    used = vertices[np.unique(triangles)]
    x0, y0 = used.min(axis=0)
    x1, y1 = used.max(axis=0)
    span = max(x1 - x0, y1 - y0, 1e-300)
    s = (width - 20) / span
    height = int(math.ceil((y1 - y0) * s)) + 20
    legend_h = 60
    px = (vertices[:, 0] - x0) * s + 10
    py = (y1 - vertices[:, 1]) * s + 10

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height + legend_h}" '
        f'viewBox="0 0 {width} {height + legend_h}">',
        f"<title>{title}</title>",
        '<g stroke="none">',
    ]
    for k, tri in enumerate(triangles):
        pts = " ".join(f"{px[i]:.3f},{py[i]:.3f}" for i in tri)
        r, g, b = rgb[k]
        out.append(f'<polygon points="{pts}" fill="rgb({r},{g},{b})"/>')
    out.append("</g>")
    # legend: color bar with min and max labels
    bar_y = height + 10
    n_stops = len(_RAMP)
    out.append('<defs><linearGradient id="ramp" x1="0" x2="1" y1="0" y2="0">')
    for i, c in enumerate(_RAMP.astype(int)):
        out.append(f'<stop offset="{i / (n_stops - 1):.4f}" stop-color="rgb({c[0]},{c[1]},{c[2]})"/>')
    out.append("</linearGradient></defs>")
    out.append(f'<rect x="10" y="{bar_y}" width="{width - 20}" height="16" fill="url(#ramp)"/>')
    out.append(f'<text x="10" y="{bar_y + 34}" font-size="12" font-family="monospace" '
               f'class="legend-min">min {_fmt(vmin)}</text>')
    out.append(f'<text x="{width - 10}" y="{bar_y + 34}" font-size="12" font-family="monospace" '
               f'text-anchor="end" class="legend-max">max {_fmt(vmax)}</text>')
    out.append(f'<text x="{width // 2}" y="{bar_y + 34}" font-size="12" font-family="monospace" '
               f'text-anchor="middle">{scale} scale</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def legend_range(svg: str):
    """Parse (min, max) back out of a rendered SVG."""
    import re

    lo = re.search(r'class="legend-min">min ([^<]+)<', svg)
    hi = re.search(r'class="legend-max">max ([^<]+)<', svg)
    if not (lo and hi):
        raise ValueError("no legend found")
    return float(lo.group(1)), float(hi.group(1))
