"""Tiny static SVG renderers for the emitted plot data (line charts and
heatmaps).  Output is deterministic text so reruns stay byte-identical."""

from __future__ import annotations

from pathlib import Path

_PALETTE = ("#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(
    series: dict[str, list[float]],
    path: str | Path,
    title: str = "",
    width: int = 720,
    height: int = 300,
) -> None:
    pad = 40
    values = [v for s in series.values() for v in s]
    if not values:
        raise ValueError("nothing to plot")
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        hi = lo + 1.0
    n = max(len(s) for s in series.values())
    sx = (width - 2 * pad) / max(n - 1, 1)
    sy = (height - 2 * pad) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad}" y="20" font-family="sans-serif" font-size="13">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#444"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#444"/>',
        f'<text x="4" y="{pad}" font-family="sans-serif" font-size="10">{_fmt(hi)}</text>',
        f'<text x="4" y="{height - pad}" font-family="sans-serif" font-size="10">{_fmt(lo)}</text>',
    ]
    for i, (name, data) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(
            f"{pad + j * sx:.2f},{height - pad - (v - lo) * sy:.2f}" for j, v in enumerate(data)
        )
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        parts.append(
            f'<text x="{width - pad - 150}" y="{20 + 14 * i}" fill="{color}" '
            f'font-family="sans-serif" font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _heat_color(v: float, lo: float, hi: float) -> str:
    """Blue (-) through white (0-ish) to red (+) on the [lo, hi] range."""
    span = max(hi - lo, 1e-12)
    t = (v - lo) / span
    r = int(255 * min(1.0, 2 * t))
    b = int(255 * min(1.0, 2 * (1 - t)))
    g = int(255 * (1 - abs(2 * t - 1)))
    return f"rgb({r},{g},{b})"


def heatmap(
    matrix: list[list[float]],
    row_labels: list[str],
    path: str | Path,
    title: str = "",
    cell: int = 7,
) -> None:
    rows = len(matrix)
    cols = max(len(r) for r in matrix)
    label_w = 110
    top = 28
    width = label_w + cols * cell + 10
    height = top + rows * (cell + 2) + 10
    values = [v for r in matrix for v in r]
    lo, hi = min(values), max(values)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="6" y="18" font-family="sans-serif" font-size="13">{title}</text>',
    ]
    for i, row in enumerate(matrix):
        y = top + i * (cell + 2)
        parts.append(
            f'<text x="4" y="{y + cell - 1}" font-family="sans-serif" font-size="10">'
            f"{row_labels[i]}</text>"
        )
        for j, v in enumerate(row):
            parts.append(
                f'<rect x="{label_w + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_heat_color(v, lo, hi)}"/>'
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
