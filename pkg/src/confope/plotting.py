"""Minimal deterministic SVG line charts for sweep output.

Renders bound vs gamma: one polyline per delta for the robust method on a
light-to-dark ramp, a black polyline for the FQE bound, and dotted reference
lines at the nominal and behavior values.  No plotting dependency; identical
input bytes give identical output bytes.
"""

from __future__ import annotations

from .errors import ValidationError
from .results import BoundResult

_WIDTH, _HEIGHT = 640, 420
_ML, _MR, _MT, _MB = 64, 160, 32, 48

# light-to-dark blue ramp endpoints for the robust delta curves
_RAMP_LIGHT = (189, 215, 255)
_RAMP_DARK = (8, 48, 107)

_METHOD_COLORS = {
    "fqe": "#000000",
    "naive": "#999999",
    "single-step": "#2a7d2a",
}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _ramp_color(rank: int, total: int) -> str:
    t = 0.5 if total <= 1 else rank / (total - 1)
    rgb = tuple(
        round(a + t * (b - a)) for a, b in zip(_RAMP_LIGHT, _RAMP_DARK)
    )
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _scale(vmin, vmax):
    if vmax - vmin < 1e-12:
        pad = max(abs(vmin), 1.0) * 0.05
        vmin, vmax = vmin - pad, vmax + pad
    return vmin, vmax


def render_chart(results: list[BoundResult], title: str = "") -> str:
    """Build a self-contained SVG chart from sweep rows."""
    if not results:
        raise ValidationError("no rows to plot")
    gammas = sorted({r.gamma for r in results})
    ys = [r.bound for r in results]
    ys.append(results[0].nominal_value)
    ys.append(results[0].behavior_value)
    x_min, x_max = _scale(min(gammas), max(gammas))
    y_min, y_max = _scale(min(ys), max(ys))
    plot_w = _WIDTH - _ML - _MR
    plot_h = _HEIGHT - _MT - _MB

    def px(g):
        return _ML + plot_w * (g - x_min) / (x_max - x_min)

    def py(v):
        return _MT + plot_h * (1.0 - (v - y_min) / (y_max - y_min))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_ML}" y="20" font-family="sans-serif" '
            f'font-size="14">{title}</text>'
        )
    # axes
    x0, y0 = _ML, _MT + plot_h
    parts.append(
        f'<line x1="{x0}" y1="{_MT}" x2="{x0}" y2="{y0}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{_ML + plot_w}" y2="{y0}" '
        'stroke="black"/>'
    )
    n_ticks = 5
    for i in range(n_ticks):
        g = x_min + (x_max - x_min) * i / (n_ticks - 1)
        parts.append(
            f'<line x1="{_fmt(px(g))}" y1="{y0}" x2="{_fmt(px(g))}" '
            f'y2="{y0 + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(px(g))}" y="{y0 + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_tick_label(g)}</text>'
        )
        v = y_min + (y_max - y_min) * i / (n_ticks - 1)
        parts.append(
            f'<line x1="{x0 - 5}" y1="{_fmt(py(v))}" x2="{x0}" '
            f'y2="{_fmt(py(v))}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x0 - 8}" y="{_fmt(py(v) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_tick_label(v)}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w // 2}" y="{_HEIGHT - 8}" '
        'text-anchor="middle" font-family="sans-serif" font-size="12">'
        "gamma</text>"
    )

    legend = []

    def add_series(label, color, pts, dashed=False):
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        if len(pts) == 1:
            g, v = pts[0]
            parts.append(
                f'<circle cx="{_fmt(px(g))}" cy="{_fmt(py(v))}" r="3" '
                f'fill="{color}"/>'
            )
        else:
            coords = " ".join(f"{_fmt(px(g))},{_fmt(py(v))}" for g, v in pts)
            parts.append(
                f'<polyline points="{coords}" fill="none" '
                f'stroke="{color}"{dash}/>'
            )
        legend.append((label, color, dashed))

    # reference lines first, so bound curves draw on top
    ref = results[0]
    for label, value in (
        ("nominal", ref.nominal_value),
        ("behavior", ref.behavior_value),
    ):
        yv = _fmt(py(value))
        parts.append(
            f'<line x1="{x0}" y1="{yv}" x2="{_ML + plot_w}" y2="{yv}" '
            'stroke="#555555" stroke-dasharray="2,3"/>'
        )
        legend.append((label, "#555555", True))

    robust_rows = [r for r in results if r.method == "robust"]
    robust_deltas = sorted({r.delta for r in robust_rows})
    for rank, d in enumerate(robust_deltas):
        pts = sorted(
            (r.gamma, r.bound) for r in robust_rows if r.delta == d
        )
        add_series(
            f"robust d={_tick_label(d)}",
            _ramp_color(rank, len(robust_deltas)),
            pts,
        )
    for method, color in _METHOD_COLORS.items():
        rows = [r for r in results if r.method == method]
        if not rows:
            continue
        pts = sorted((r.gamma, r.bound) for r in rows)
        add_series(method, color, pts)

    lx = _ML + plot_w + 12
    for i, (label, color, dashed) in enumerate(legend):
        ly = _MT + 14 + 18 * i
        dash = ' stroke-dasharray="4,3"' if dashed else ""
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}"{dash}/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
