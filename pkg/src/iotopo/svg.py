"""Tiny deterministic SVG chart emission (polylines, bars, axes).

No plotting stack: charts are assembled as strings with fixed float
formatting so identical inputs produce identical bytes.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 55
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + k * step for k in range(count)]


def _header(title: str) -> List[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]


def _axes(xlo, xhi, ylo, yhi, xlabel, ylabel) -> Tuple[List[str], callable, callable]:
    px0, px1 = MARGIN_L, WIDTH - MARGIN_R
    py0, py1 = HEIGHT - MARGIN_B, MARGIN_T

    def sx(x):
        return px0 + (x - xlo) / (xhi - xlo) * (px1 - px0)

    def sy(y):
        return py0 - (y - ylo) / (yhi - ylo) * (py0 - py1)

    parts = [
        f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>',
        f'<text x="{(px0 + px1) // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{(py0 + py1) // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(py0 + py1) // 2})">{ylabel}</text>',
    ]
    for t in _ticks(xlo, xhi):
        x = sx(t)
        parts.append(f'<line x1="{_fmt(x)}" y1="{py0}" x2="{_fmt(x)}" y2="{py0 + 4}" stroke="black"/>')
        parts.append(
            f'<text x="{_fmt(x)}" y="{py0 + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{t:.3g}</text>'
        )
    for t in _ticks(ylo, yhi):
        y = sy(t)
        parts.append(f'<line x1="{px0 - 4}" y1="{_fmt(y)}" x2="{px0}" y2="{_fmt(y)}" stroke="black"/>')
        parts.append(
            f'<text x="{px0 - 8}" y="{_fmt(y + 3)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{t:.3g}</text>'
        )
    return parts, sx, sy


def line_chart(
    series: Sequence[Tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
) -> str:
    """series: (label, xs, ys) triples, drawn as marked polylines."""
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    if not all_x:
        all_x, all_y = [0.0, 1.0], [0.0, 1.0]
    xlo, xhi = min(all_x), max(all_x)
    ylo, yhi = min(all_y + [0.0]), max(all_y)
    if xhi <= xlo:
        xhi = xlo + 1.0
    if yhi <= ylo:
        yhi = ylo + 1.0
    parts = _header(title)
    ax, sx, sy = _axes(xlo, xhi, ylo, yhi, xlabel, ylabel)
    parts += ax
    for k, (label, xs, ys) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        ly = MARGIN_T + 16 * k
        parts.append(f'<rect x="{WIDTH - 170}" y="{ly - 9}" width="12" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{WIDTH - 152}" y="{ly}" font-family="sans-serif" font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(
    labels: Sequence[str],
    values: Sequence[float],
    title: str,
    ylabel: str,
    errors: Sequence[float] | None = None,
) -> str:
    """One bar per label, optional symmetric error whiskers."""
    if not labels:
        labels, values = ["(empty)"], [0.0]
    ylo = 0.0
    yhi = max(list(values) + [1e-9])
    if errors is not None:
        yhi = max(yhi, max(v + e for v, e in zip(values, errors)))
    parts = _header(title)
    ax, sx, sy = _axes(0.0, float(len(labels)), ylo, yhi * 1.1, "", ylabel)
    parts += ax
    width = (WIDTH - MARGIN_L - MARGIN_R) / len(labels)
    for k, (label, value) in enumerate(zip(labels, values)):
        color = COLORS[k % len(COLORS)]
        x0 = MARGIN_L + k * width + 0.2 * width
        y0 = sy(value)
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(0.6 * width)}" '
            f'height="{_fmt(HEIGHT - MARGIN_B - y0)}" fill="{color}"/>'
        )
        cx = x0 + 0.3 * width
        if errors is not None:
            e = errors[k]
            parts.append(
                f'<line x1="{_fmt(cx)}" y1="{_fmt(sy(value - e))}" '
                f'x2="{_fmt(cx)}" y2="{_fmt(sy(value + e))}" stroke="black"/>'
            )
        parts.append(
            f'<text x="{_fmt(cx)}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{label}</text>'
        )
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(y0 - 5)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{value:.4g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
