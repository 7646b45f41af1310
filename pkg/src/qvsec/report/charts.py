"""Report figures: Q-V curve, clustered zone-delta heatmap, margin scatter."""

from __future__ import annotations

import math
from typing import Sequence

from ..clustering import ClusterModel, FeatureMatrix, display_order
from ..qv import QvPoint, _nose
from .svg import Axes, Svg, fmt

# Diverging red-to-blue palette, negative (degradation) to positive (improvement).
PALETTE = ("#b2182b", "#d6604d", "#f4a582", "#fddbc7", "#f7f7f7",
           "#d1e5f0", "#92c5de", "#4393c3", "#2166ac")
CENTER = PALETTE[4]


def color_for(value: float, saturation: float = 30.0) -> str:
    """Palette stop for a percent delta; values beyond +-saturation clip to the ends."""
    if not math.isfinite(value):
        return "#bdbdbd"
    t = max(-1.0, min(1.0, value / saturation))
    return PALETTE[int(round((t + 1.0) * 4))]


def qv_curve_svg(study_bus: int, points: Sequence[QvPoint], config_hash: str = "") -> str:
    good = [p for p in points if p.converged]
    margin, v_nose = _nose(list(points))
    svg = Svg(560, 380, f"Q-V curve at bus {study_bus}", {"config-hash": config_hash,
                                                         "study-bus": study_bus})
    svg.text(280, 22, f"Q-V curve, bus {study_bus}", size=14, anchor="middle")
    if not good:
        svg.text(280, 190, "no converged points", anchor="middle")
        return svg.render()
    xs = [p.v_set for p in good]
    ys = [p.q_fict for p in good]
    ax = Axes(svg, (80, 40, 440, 280), (min(xs), max(xs)), (min(ys + [0.0]), max(ys + [0.0])))
    ax.frame("voltage setpoint (p.u.)", "fictitious source Q (MVAr)")
    svg.line(ax.x0, ax.py(0.0), ax.x0 + ax.w, ax.py(0.0), stroke="#888", stroke_dasharray="4 3")
    svg.polyline([(ax.px(x), ax.py(y)) for x, y in zip(xs, ys)])
    nx, ny = ax.px(v_nose), ax.py(-margin)
    svg.circle(nx, ny, 4, fill="#c00000")
    label = f"Q-margin {margin:.2f} MVAr at V = {v_nose:.3f} p.u."
    anchor = "start" if nx < ax.x0 + ax.w / 2 else "end"
    svg.text(nx + (8 if anchor == "start" else -8), ny - 8, label, size=11, anchor=anchor)
    return svg.render()


def scatter_svg(entries: Sequence[tuple[int, float, float]], config_hash: str = "",
                title: str = "Extractable Q vs collapse voltage") -> str:
    """``entries`` are (bus, v_nose, q_margin); plotted at (v_nose, -q_margin)."""
    svg = Svg(560, 400, title, {"config-hash": config_hash, "points": len(entries)})
    svg.text(280, 22, title, size=14, anchor="middle")
    pts = [(b, v, -q) for b, v, q in entries if math.isfinite(v) and math.isfinite(q)]
    if not pts:
        svg.text(280, 200, "no points", anchor="middle")
        return svg.render()
    xs = [p[1] for p in pts]
    ys = [p[2] for p in pts]
    ax = Axes(svg, (90, 40, 430, 300), (min(xs), max(xs)), (min(ys), max(ys + [0.0])), margin=0.06)
    ax.frame("voltage at collapse (p.u.)", "max extractable Q (MVAr, negative)")
    for b, x, y in pts:
        svg.circle(ax.px(x), ax.py(y), 4, fill="#1f4e79")
        svg.text(ax.px(x) + 6, ax.py(y) - 5, str(b), size=9)
    return svg.render()


def heatmap_svg(features: FeatureMatrix, model: ClusterModel, config_hash: str = "",
                saturation: float = 30.0, title: str = "Zone Q-margin change (%)") -> str:
    """Rows are zones, columns are cases grouped by cluster with black separators."""
    groups = display_order(model)
    cell_w, cell_h = 18.0, 26.0
    left, top = 130.0, 50.0
    n_cols = sum(len(g) for g in groups)
    n_rows = len(features.cols)
    width = left + cell_w * n_cols + 40 + 70
    label_room = 9.0 * max((len(r) for r in features.rows), default=4) * 0.62 + 16
    height = top + cell_h * n_rows + label_room + 30
    svg = Svg(width, max(height, 200.0), title,
              {"config-hash": config_hash, "k": model.k, "seed": model.seed,
               "saturation-pct": fmt(saturation), "clusters-shown": len(groups)})
    svg.text(left, 24, title, size=14)
    for r, zone in enumerate(features.cols):
        svg.text(left - 8, top + cell_h * r + cell_h / 2 + 4, zone, size=11, anchor="end")
    col = 0
    boundaries = []
    for g_i, members in enumerate(groups):
        if g_i:
            boundaries.append(col)
        for i in members:
            x = left + col * cell_w
            for r in range(n_rows):
                v = float(features.values[i, r])
                svg.rect(x, top + r * cell_h, cell_w, cell_h, fill=color_for(v, saturation),
                         stroke="#ffffff", stroke_width=0.5, data_value=f"{v:.6g}")
            lx, ly = x + cell_w / 2 + 3, top + n_rows * cell_h + 8
            svg.text(lx, ly, features.rows[i], size=9, anchor="end",
                     transform=f"rotate(-90 {fmt(lx)} {fmt(ly)})")
            col += 1
    for b in boundaries:
        x = left + b * cell_w
        svg.line(x, top - 6, x, top + n_rows * cell_h + 6, stroke="#000", width=2.0,
                 class_="cluster-separator")
    # legend
    lx = left + n_cols * cell_w + 30
    step = 2 * saturation / 8
    for s, color in enumerate(reversed(PALETTE)):
        y = top + s * 16
        svg.rect(lx, y, 14, 16, fill=color)
        svg.text(lx + 18, y + 12, f"{saturation - s * step:+.1f}", size=9)
    return svg.render()


def separator_count(svg_text: str) -> int:
    return svg_text.count('class="cluster-separator"')
