"""Self-contained SVG emission for training curves and sweep summaries.

No plotting library: the charts are simple enough that writing the SVG
directly keeps outputs byte-stable and dependency-free.
"""

import numpy as np

_W, _H = 860, 520
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 30, 50, 70
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError(f"non-finite coordinate: {x}")
    return f"{x:.2f}"


def _fmt_val(x: float) -> str:
    return f"{x:.4g}"


def _header(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="28" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]


def line_plot(series, title: str, path, x_label: str = "epoch") -> None:
    """series: list of (label, list of float-or-None). Each series is
    min-max normalized to the shared panel; the legend carries its range."""
    if not series or all(not pts for _, pts in series):
        raise ValueError("line_plot needs at least one non-empty series")
    parts = _header(title)
    x0, x1 = _MARGIN_L, _W - _MARGIN_R
    y0, y1 = _H - _MARGIN_B, _MARGIN_T + 20
    parts.append(
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        f'fill="none" stroke="#999"/>'
    )
    n = max(len(pts) for _, pts in series)
    for k, (label, pts) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        vals = [p for p in pts if p is not None]
        if not vals:
            continue
        lo, hi = min(vals), max(vals)
        span = hi - lo if hi > lo else 1.0
        coords = []
        for i, p in enumerate(pts):
            if p is None:
                continue
            fx = x0 + (x1 - x0) * (i / max(n - 1, 1))
            fy = y0 - (y0 - y1) * ((p - lo) / span)
            coords.append(f"{_fmt(fx)},{_fmt(fy)}")
        parts.append(
            f'<polyline points="{" ".join(coords)}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{x0 + 8}" y="{y1 + 18 + 16 * k}" font-family="sans-serif" '
            f'font-size="11" fill="{color}">{label} '
            f"[{_fmt_val(lo)}, {_fmt_val(hi)}] (normalized)</text>"
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2:.0f}" y="{_H - 25}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def grouped_bars(group_labels, series, title: str, path) -> None:
    """series: list of (label, values per group). Bar heights are scaled per
    series by max |value|; the actual value is printed above each bar."""
    if not group_labels or not series:
        raise ValueError("grouped_bars needs groups and series")
    parts = _header(title)
    x0, x1 = _MARGIN_L, _W - _MARGIN_R
    y0, y1 = _H - _MARGIN_B, _MARGIN_T + 20
    n_groups = len(group_labels)
    n_series = len(series)
    group_w = (x1 - x0) / n_groups
    bar_w = group_w / (n_series + 1)
    for k, (label, values) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        peak = max(abs(v) for v in values) or 1.0
        for j, v in enumerate(values):
            h = (y0 - y1 - 20) * abs(v) / peak
            bx = x0 + j * group_w + (k + 0.5) * bar_w
            parts.append(
                f'<rect x="{_fmt(bx)}" y="{_fmt(y0 - h)}" width="{_fmt(bar_w * 0.9)}" '
                f'height="{_fmt(h)}" fill="{color}"/>'
            )
            parts.append(
                f'<text x="{_fmt(bx + bar_w * 0.45)}" y="{_fmt(y0 - h - 4)}" '
                f'text-anchor="middle" font-family="sans-serif" font-size="10">'
                f"{_fmt_val(v)}</text>"
            )
        parts.append(
            f'<text x="{x0 + 8}" y="{y1 + 18 + 16 * k}" font-family="sans-serif" '
            f'font-size="11" fill="{color}">{label} (scaled per series)</text>'
        )
    for j, g in enumerate(group_labels):
        parts.append(
            f'<text x="{_fmt(x0 + (j + 0.5) * group_w)}" y="{y0 + 20}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="12">{g}</text>'
        )
    parts.append(
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        f'fill="none" stroke="#999"/>'
    )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
