"""Minimal line-chart SVG output, one chart per sweep."""
from __future__ import annotations

from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 50


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / count
    return [lo + i * step for i in range(count + 1)]


def line_chart(title: str, ylabel: str, series: dict[str, list[tuple[float, float]]],
               references: list[tuple[str, float]] = ()) -> str:
    """Render ``series`` (name -> sorted (x, y) points) as an SVG document.

    ``references`` are horizontal lines drawn in black.
    """
    ys = [y for pts in series.values() for _, y in pts] + [v for _, v in references]
    ys = [y for y in ys if y == y]
    ylo, yhi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if yhi - ylo < 1e-9:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = 0.0, 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return TOP + (yhi - y) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT + pw / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for x in _ticks(xlo, xhi):
        out.append(f'<line x1="{sx(x):.1f}" y1="{TOP + ph}" x2="{sx(x):.1f}" y2="{TOP + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{sx(x):.1f}" y="{TOP + ph + 18}" text-anchor="middle">{x:.1f}</text>')
    for y in _ticks(ylo, yhi):
        out.append(f'<line x1="{LEFT - 5}" y1="{sy(y):.1f}" x2="{LEFT}" y2="{sy(y):.1f}" stroke="#333"/>')
        out.append(f'<text x="{LEFT - 8}" y="{sy(y) + 4:.1f}" text-anchor="end">{y:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">rho</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')

    for label, value in references:
        out.append(f'<line x1="{LEFT}" y1="{sy(value):.1f}" x2="{LEFT + pw}" y2="{sy(value):.1f}" '
                   f'stroke="black" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{LEFT + pw + 6}" y="{sy(value) + 4:.1f}">{escape(label)}</text>')

    legend_y = TOP + 10
    for i, (name, pts) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        pts = [(x, y) for x, y in pts if y == y]
        if pts:
            path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        legend_y += 16
        out.append(f'<line x1="{LEFT + pw + 10}" y1="{legend_y + 20}" x2="{LEFT + pw + 30}" '
                   f'y2="{legend_y + 20}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw + 35}" y="{legend_y + 24}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
