"""Dependency-free SVG line charts."""

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(v):
    return f"{v:.4g}"


def line_chart(series, title="", xlabel="", ylabel="", log_y=False, colors=None):
    """Render ``{name: (xs, ys)}`` as an SVG document string.

    Non-finite points (and non-positive ones on a log axis) are skipped.
    """
    cleaned = {}
    for name, (xs, ys) in series.items():
        pts = [
            (float(x), float(y))
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y) and (y > 0 or not log_y)
        ]
        if pts:
            cleaned[name] = [(x, math.log10(y) if log_y else y) for x, y in pts]
    all_pts = [p for pts in cleaned.values() for p in pts] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in all_pts), max(p[0] for p in all_pts)
    y0, y1 = min(p[1] for p in all_pts), max(p[1] for p in all_pts)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        ylab = _fmt(10**yv) if log_y else _fmt(yv)
        out.append(f'<text x="{sx(xv):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{MARGIN - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{ylab}</text>')
    colors = colors or {}
    for i, (name, pts) in enumerate(cleaned.items()):
        color = colors.get(name, PALETTE[i % len(PALETTE)])
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        if len(cleaned) <= len(PALETTE):
            ly = MARGIN + 14 + 14 * i
            out.append(f'<text x="{WIDTH - MARGIN - 4}" y="{ly}" text-anchor="end" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def spectrum_heatline(trace, layer):
    """One line per singular-value index of ``layer`` across restarts, shaded
    from dark (largest) to light."""
    epochs = [e for e, layers in trace.entries if layer in layers]
    if not epochs:
        return line_chart({}, title=f"spectrum of {layer}")
    depth = max(len(layers[layer]) for e, layers in trace.entries if layer in layers)
    series, colors = {}, {}
    for i in range(depth):
        ys = [
            layers[layer][i] if i < len(layers[layer]) else float("nan")
            for e, layers in trace.entries
            if layer in layers
        ]
        series[f"s{i}"] = (epochs, ys)
        shade = int(30 + 200 * i / max(depth - 1, 1))
        colors[f"s{i}"] = f"rgb({shade},{shade},255)"
    return line_chart(
        series, title=f"singular values of {layer} before each restart",
        xlabel="epoch", ylabel="singular value", log_y=True, colors=colors,
    )
