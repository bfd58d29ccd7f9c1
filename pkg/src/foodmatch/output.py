"""Result emission: RFC-4180 CSV tables and self-contained SVG charts.

Both formats are pure functions of the data, so identical inputs produce
byte-identical files; nothing environment- or time-dependent is embedded.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence, Union

CHART_W, CHART_H = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))


def _fmt(value: float) -> str:
    return format(value, ".6g")


def _scale(values: Sequence[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def render_line_chart(
    series: Sequence[tuple[str, Sequence[tuple[float, float]]]],
    title: str,
    x_label: str,
    y_label: str,
) -> str:
    """A minimal multi-series line chart as a standalone SVG document."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_W}" height="{CHART_H}" '
        f'viewBox="0 0 {CHART_W} {CHART_H}">',
        f'<rect width="{CHART_W}" height="{CHART_H}" fill="white"/>',
        f'<text x="{CHART_W/2:g}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15" font-weight="bold">{title}</text>',
    ]
    plot_w = CHART_W - MARGIN_L - MARGIN_R
    plot_h = CHART_H - MARGIN_T - MARGIN_B

    points = [p for _, data in series for p in data]
    if points:
        x_lo, x_hi = _scale([p[0] for p in points])
        y_lo, y_hi = _scale([p[1] for p in points])

        def sx(x: float) -> float:
            return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

        def sy(y: float) -> float:
            return MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

        for i in range(5):
            gx = x_lo + i * (x_hi - x_lo) / 4
            gy = y_lo + i * (y_hi - y_lo) / 4
            parts.append(
                f'<line x1="{_fmt(sx(gx))}" y1="{MARGIN_T}" x2="{_fmt(sx(gx))}" '
                f'y2="{MARGIN_T + plot_h}" stroke="#dddddd"/>'
            )
            parts.append(
                f'<line x1="{MARGIN_L}" y1="{_fmt(sy(gy))}" x2="{MARGIN_L + plot_w}" '
                f'y2="{_fmt(sy(gy))}" stroke="#dddddd"/>'
            )
            parts.append(
                f'<text x="{_fmt(sx(gx))}" y="{MARGIN_T + plot_h + 18}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{_fmt(gx)}</text>'
            )
            parts.append(
                f'<text x="{MARGIN_L - 8}" y="{_fmt(sy(gy) + 4)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{_fmt(gy)}</text>'
            )

        for index, (label, data) in enumerate(series):
            if not data:
                continue
            color = PALETTE[index % len(PALETTE)]
            coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in data)
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>'
            )
            for x, y in data:
                parts.append(
                    f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>'
                )
            parts.append(
                f'<text x="{MARGIN_L + plot_w - 6}" y="{MARGIN_T + 16 + 16 * index}" '
                f'text-anchor="end" font-family="sans-serif" font-size="12" '
                f'fill="{color}">{label}</text>'
            )

    parts.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333"/>'
    )
    parts.append(
        f'<text x="{MARGIN_L + plot_w/2:g}" y="{CHART_H - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{MARGIN_T + plot_h/2:g}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 16 {MARGIN_T + plot_h/2:g})">{y_label}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path: Union[str, Path], svg_text: str) -> None:
    Path(path).write_text(svg_text)
