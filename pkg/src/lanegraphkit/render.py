"""SVG rendering of lane graphs: quadratic paths, heading arrows, junction dots."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import quoteattr

import numpy as np

from .lane_graph import LaneGraph

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".") if v != 0 else "0"


def render_svg(
    graphs: Sequence[LaneGraph],
    labels: Sequence[str] | None = None,
    window: tuple[float, float, float, float] | None = None,
    scale: float = 10.0,
    margin: float = 2.0,
) -> str:
    """Draw ``graphs`` top-down: +x to the right, +z (forward) up.

    ``window`` is (x_min, x_max, z_min, z_max) in metres; by default it is the
    bounding box of all control points plus ``margin``.
    """
    labels = list(labels) if labels is not None else [f"graph {k}" for k in range(len(graphs))]
    if window is None:
        pts = [g.control_points.reshape(-1, 2) for g in graphs if len(g)]
        if pts:
            allp = np.concatenate(pts)
            lo, hi = allp.min(axis=0) - margin, allp.max(axis=0) + margin
            window = (lo[0], hi[0], lo[1], hi[1])
        else:
            window = (-25.0, 25.0, 1.0, 50.0)
    x0, x1, z0, z1 = window
    width = (x1 - x0) * scale
    height = (z1 - z0) * scale

    def px(p):
        return _fmt((p[0] - x0) * scale), _fmt((z1 - p[1]) * scale)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        "<defs>",
    ]
    for k in range(len(graphs)):
        colour = PALETTE[k % len(PALETTE)]
        out.append(
            f'<marker id="arrow{k}" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" '
            f'orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z" fill="{colour}"/></marker>'
        )
    out.append("</defs>")
    out.append(f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="white"/>')

    for k, (g, label) in enumerate(zip(graphs, labels)):
        colour = PALETTE[k % len(PALETTE)]
        out.append(f"<g class=\"graph\" data-label={quoteattr(label)}>")
        for i, c in enumerate(g.centerlines):
            (ax, ay), (bx, by), (cx, cy) = (px(p) for p in c.control_points)
            out.append(
                f'<path class="centerline" data-index="{i}" d="M {ax} {ay} Q {bx} {by} {cx} {cy}" '
                f'fill="none" stroke="{colour}" stroke-width="2" marker-end="url(#arrow{k})"/>'
            )
        for a, b in g.edges():
            jx, jy = px(0.5 * (g.centerlines[a].end + g.centerlines[b].start))
            out.append(f'<circle class="junction" data-edge="{a}-{b}" cx="{jx}" cy="{jy}" r="3" fill="{colour}"/>')
        out.append("</g>")

    for k, label in enumerate(labels):
        colour = PALETTE[k % len(PALETTE)]
        out.append(f'<text x="6" y="{14 + 14 * k}" font-size="12" fill="{colour}">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
