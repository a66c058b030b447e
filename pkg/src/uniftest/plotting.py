"""Deterministic SVG charts for experiment reports.

The chart is assembled as plain text so a report renders to byte-identical
SVG on every run; no plotting library is involved.
"""

from __future__ import annotations

import csv
from pathlib import Path

__all__ = ["emit_plot"]

_COLORS = {"sct": "#1f77b4", "batch": "#d62728", "abc": "#2ca02c"}
_WIDTH, _HEIGHT = 720, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 72, 24, 40, 56


def _fmt(v: float) -> str:
    return format(v, ".6g")


def _series_from(report) -> dict[str, list[dict]]:
    cells = report.cells if hasattr(report, "cells") else report["cells"]
    series: dict[str, list[dict]] = {}
    for cell in cells:
        if cell["truth"] != "H1" or cell["gamma"] is None:
            continue
        series.setdefault(cell["algorithm"], []).append(cell)
    for rows in series.values():
        rows.sort(key=lambda c: c["gamma"])
    return series


def emit_plot(report, path, table_path=None) -> Path:
    """Write mean-samples-vs-distance curves (one series per algorithm).

    Error bars are one standard deviation.  The underlying table goes to a
    sibling ``.csv`` (or ``table_path``).  Raises on a report without an
    alternative sweep.
    """
    series = _series_from(report)
    if not series:
        raise ValueError("report contains no alternative-sweep cells to plot")
    path = Path(path)
    if table_path is None:
        table_path = path.with_suffix(".csv")

    xs = [c["gamma"] for rows in series.values() for c in rows]
    tops = [c["mean_samples"] + c["stddev_samples"] for rows in series.values() for c in rows]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.05, x_hi + 0.05
    y_hi = max(tops) * 1.05 or 1.0

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(x: float) -> str:
        return _fmt(_MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w)

    def sy(y: float) -> str:
        return _fmt(_MARGIN_T + plot_h - y / y_hi * plot_h)

    name = report.name if hasattr(report, "name") else report.get("name", "experiment")
    out = [
        f'<svg width="{_WIDTH}" height="{_HEIGHT}" xmlns="http://www.w3.org/2000/svg">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{_WIDTH // 2}" y="24" font-family="sans-serif" font-size="16" '
        f'text-anchor="middle">mean samples vs distance to uniform ({name})</text>',
    ]
    # axes and horizontal gridlines with tick labels
    ax_y = _MARGIN_T + plot_h
    out.append(
        f'<line x1="{_MARGIN_L}" y1="{ax_y}" x2="{_WIDTH - _MARGIN_R}" y2="{ax_y}" stroke="black"/>'
    )
    out.append(
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" y2="{ax_y}" stroke="black"/>'
    )
    for i in range(5):
        yv = y_hi * (i + 1) / 5
        yc = sy(yv)
        out.append(
            f'<line x1="{_MARGIN_L}" y1="{yc}" x2="{_WIDTH - _MARGIN_R}" y2="{yc}" '
            'stroke="#dddddd" stroke-dasharray="4"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L - 6}" y="{yc}" font-family="sans-serif" font-size="11" '
            f'text-anchor="end" dominant-baseline="middle">{_fmt(yv)}</text>'
        )
    for x in sorted(set(xs)):
        xc = sx(x)
        out.append(
            f'<text x="{xc}" y="{ax_y + 18}" font-family="sans-serif" font-size="11" '
            f'text-anchor="middle">{_fmt(x)}</text>'
        )
    out.append(
        f'<text x="{_MARGIN_L + plot_w // 2}" y="{_HEIGHT - 12}" font-family="sans-serif" '
        'font-size="13" text-anchor="middle">l1 distance to uniform</text>'
    )
    out.append(
        f'<text x="18" y="{_MARGIN_T + plot_h // 2}" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 18 {_MARGIN_T + plot_h // 2})">'
        "mean samples used</text>"
    )

    legend_y = _MARGIN_T + 8
    for algorithm in sorted(series):
        rows = series[algorithm]
        color = _COLORS.get(algorithm, "#555555")
        for c in rows:  # error bars: +/- one standard deviation
            x = sx(c["gamma"])
            lo = sy(max(c["mean_samples"] - c["stddev_samples"], 0.0))
            hi = sy(c["mean_samples"] + c["stddev_samples"])
            out.append(f'<line x1="{x}" y1="{lo}" x2="{x}" y2="{hi}" stroke="{color}"/>')
        points = " ".join(f'{sx(c["gamma"])},{sy(c["mean_samples"])}' for c in rows)
        out.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for c in rows:
            out.append(
                f'<circle cx="{sx(c["gamma"])}" cy="{sy(c["mean_samples"])}" r="3" '
                f'fill="{color}"/>'
            )
        out.append(
            f'<rect x="{_WIDTH - _MARGIN_R - 130}" y="{legend_y}" width="12" height="12" '
            f'fill="{color}"/>'
        )
        out.append(
            f'<text x="{_WIDTH - _MARGIN_R - 112}" y="{legend_y + 10}" '
            f'font-family="sans-serif" font-size="12">{algorithm}</text>'
        )
        legend_y += 18
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")

    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["algorithm", "gamma", "mean_samples", "stddev_samples", "accuracy", "trials"]
        )
        for algorithm in sorted(series):
            for c in series[algorithm]:
                writer.writerow(
                    [
                        algorithm,
                        repr(float(c["gamma"])),
                        repr(float(c["mean_samples"])),
                        repr(float(c["stddev_samples"])),
                        repr(float(c["accuracy"])),
                        c["trials"],
                    ]
                )
    return path
