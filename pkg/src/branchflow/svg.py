"""Deterministic SVG drawings of planar transport graphs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostParams, h_value
from .errors import UnsupportedDimension
from .graph import TransportGraph

STROKE_MIN = 1.0
STROKE_SPAN = 4.0


@dataclass(frozen=True)
class RenderSpec:
    mode: str = "weight"
    width: int = 640
    height: int = 480
    labels: bool = False
    margin: int = 32

    def __post_init__(self):
        if self.mode not in ("weight", "h-value"):
            raise ValueError(f"unknown stroke mode {self.mode!r}")
        if self.width <= 2 * self.margin or self.height <= 2 * self.margin:
            raise ValueError("canvas too small for its margin")


def _fmt(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def stroke_widths(g: TransportGraph, spec: RenderSpec, params: CostParams | None = None) -> list[float]:
    """``1 + 4 * q / max q`` per edge, where ``q`` is weight or H-value."""
    if spec.mode == "h-value":
        if params is None:
            raise ValueError("h-value strokes need cost parameters")
        q = np.array([h_value(e.weight, params) for e in g.edges])
    else:
        q = g.weights
    if len(q) == 0:
        return []
    top = float(q.max())
    return [STROKE_MIN + STROKE_SPAN * float(v) / top for v in q]


def render_svg(g: TransportGraph, spec: RenderSpec | None = None, params: CostParams | None = None) -> str:
    spec = spec or RenderSpec()
    if g.vertices and g.dimension != 2:
        raise UnsupportedDimension(f"can only draw planar graphs, got dimension {g.dimension}")
    W, H, m = spec.width, spec.height, spec.margin
    if g.vertices:
        pts = np.array([v.pos for v in g.vertices], dtype=float)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    scale = min((W - 2 * m) / span[0], (H - 2 * m) / span[1])
    off = np.array([(W - scale * (hi[0] - lo[0])) / 2, (H - scale * (hi[1] - lo[1])) / 2])

    def to_px(p):
        x = off[0] + scale * (p[0] - lo[0])
        y = H - (off[1] + scale * (p[1] - lo[1]))
        return x, y

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        "<defs>",
        '<marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="4" '
        'markerHeight="4" orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z" '
        'fill="#1f3b73"/></marker>',
        "</defs>",
        f'<rect width="{W}" height="{H}" fill="white"/>',
    ]
    widths = stroke_widths(g, spec, params)
    edges = sorted(zip(g.edges, widths), key=lambda t: t[0].id)
    for e, sw in edges:
        x1, y1 = to_px(g.position(e.tail))
        x2, y2 = to_px(g.position(e.head))
        lines.append(
            f'<line id="e{e.id}" x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="#1f3b73" stroke-width="{_fmt(sw)}" stroke-linecap="round" '
            f'marker-end="url(#arrow)"/>'
        )
    for v in sorted(g.vertices, key=lambda v: v.id):
        cx, cy = to_px(v.pos)
        lines.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="2.5" fill="#b22222"/>')
    if spec.labels:
        for e, _ in edges:
            mx, my = to_px((g.position(e.tail) + g.position(e.head)) / 2)
            lines.append(
                f'<text x="{_fmt(mx)}" y="{_fmt(my - 4)}" font-size="11" font-family="sans-serif" '
                f'text-anchor="middle">{e.weight:.4g}</text>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
