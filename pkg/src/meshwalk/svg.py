"""Minimal SVG line charts (no plotting dependency)."""

from pathlib import Path

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    return [lo + span * i / (count - 1) for i in range(count)]


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1000 or abs(v) < 0.01:
        return f"{v:.2g}"
    return f"{v:.3g}"


def line_chart(series, path, title="", x_label="", y_label="",
               width=720, height=440):
    """Write a line chart to *path*.

    series: list of (name, xs, ys) triples; empty series are skipped.
    """
    series = [(n, list(xs), list(ys)) for n, xs, ys in series
              if len(xs) and len(xs) == len(ys)]
    margin_l, margin_r, margin_t, margin_b = 62, 16, 34, 46
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    if series:
        x_lo = min(min(xs) for _, xs, _ in series)
        x_hi = max(max(xs) for _, xs, _ in series)
        y_lo = min(min(ys) for _, _, ys in series)
        y_hi = max(max(ys) for _, _, ys in series)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0

    def px(x):
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return margin_t + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin_l}" y="{margin_t}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#444"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="20" '
                     f'text-anchor="middle" font-size="14">{title}</text>')
    for tx in _ticks(x_lo, x_hi):
        x = px(tx)
        parts.append(f'<line x1="{x:.1f}" y1="{margin_t + plot_h}" '
                     f'x2="{x:.1f}" y2="{margin_t + plot_h + 4}" '
                     f'stroke="#444"/>')
        parts.append(f'<text x="{x:.1f}" y="{margin_t + plot_h + 17}" '
                     f'text-anchor="middle">{_fmt(tx)}</text>')
    for ty in _ticks(y_lo, y_hi):
        y = py(ty)
        parts.append(f'<line x1="{margin_l - 4}" y1="{y:.1f}" '
                     f'x2="{margin_l}" y2="{y:.1f}" stroke="#444"/>')
        parts.append(f'<text x="{margin_l - 7}" y="{y + 4:.1f}" '
                     f'text-anchor="end">{_fmt(ty)}</text>')
    if x_label:
        parts.append(f'<text x="{margin_l + plot_w / 2:.1f}" '
                     f'y="{height - 10}" text-anchor="middle">{x_label}</text>')
    if y_label:
        cx, cy = 16, margin_t + plot_h / 2
        parts.append(f'<text x="{cx}" y="{cy:.1f}" text-anchor="middle" '
                     f'transform="rotate(-90 {cx} {cy:.1f})">{y_label}</text>')

    for i, (name, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.6"/>')
        if name:
            ly = margin_t + 14 + 16 * i
            lx = margin_l + 10
            parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" '
                         f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{lx + 24}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
