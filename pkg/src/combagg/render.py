"""SVG pictures of clusters: one unit square per vertex, y pointing up."""

from __future__ import annotations

import numpy as np

from .lattice import Region
from .shape import K_SHAPE, L_SHAPE, _in_ball_arrays

MAX_PIXELS = 800
OUTLINE_SAMPLES = 400


def parse_overlay(spec: str | None) -> float | None:
    """``"ball:N"`` -> ``N``; ``None`` passes through."""
    if spec is None:
        return None
    kind, _, value = spec.partition(":")
    if kind != "ball" or not value:
        raise ValueError(f"overlay must look like ball:N, got {spec!r}")
    n = float(value)
    if not n > 0:
        raise ValueError("overlay mass must be positive")
    return n


def ball_outline(n: float, samples: int = OUTLINE_SAMPLES) -> np.ndarray:
    """Closed polygon tracing ``|x|/k + sqrt(|y|/l) = n^(1/3)``."""
    r = float(np.cbrt(n))
    xs = np.linspace(-K_SHAPE * r, K_SHAPE * r, samples)
    top = L_SHAPE * (r - np.abs(xs) / K_SHAPE) ** 2
    upper = np.column_stack([xs, top])
    lower = np.column_stack([xs[::-1], -top[::-1]])
    return np.vstack([upper, lower])


def inside_fraction(region: Region, n: float) -> float:
    """Share of vertices whose square centre lies inside the ball outline."""
    if not len(region):
        return 1.0
    return float(np.mean(_in_ball_arrays(float(np.cbrt(n)), region.xs, region.ys)))


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def render_svg(region: Region, overlay: float | None = None) -> str:
    if len(region):
        x0, x1, y0, y1 = region.extent()
    else:
        x0 = x1 = y0 = y1 = 0
    if overlay is not None:
        r = float(np.cbrt(overlay))
        xr, yr = int(np.ceil(K_SHAPE * r)), int(np.ceil(L_SHAPE * r * r))
        x0, x1, y0, y1 = min(x0, -xr), max(x1, xr), min(y0, -yr), max(y1, yr)
    # viewBox in lattice units; vertex (x, y) covers [x - 1/2, x + 1/2] and y is flipped
    left, top = x0 - 1.5, -y1 - 1.5
    width, height = x1 - x0 + 3, y1 - y0 + 3
    scale = max(1.0, min(8.0, MAX_PIXELS / max(width, height)))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width * scale)}" height="{_fmt(height * scale)}" '
        f'viewBox="{_fmt(left)} {_fmt(top)} {_fmt(width)} {_fmt(height)}">',
        f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(width)}" height="{_fmt(height)}" fill="white"/>',
        '<g fill="#1f4e79" stroke="none">',
    ]
    for x, y in zip(region.xs.tolist(), region.ys.tolist()):
        out.append(f'<rect x="{_fmt(x - 0.5)}" y="{_fmt(-y - 0.5)}" width="1" height="1"/>')
    out.append("</g>")
    if overlay is not None:
        pts = " ".join(f"{_fmt(px)},{_fmt(-py)}" for px, py in ball_outline(overlay))
        out.append(f'<polygon points="{pts}" fill="none" stroke="#c0392b" stroke-width="0.3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
