"""Minimal standalone SVG line plots from CSV columns."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 80, "right": 20, "top": 40, "bottom": 60}


def read_columns(csv_path, x_col, y_col):
    csv_path = Path(csv_path)
    with csv_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (x_col, y_col):
            if col not in header:
                raise KeyError(f"{csv_path}: no column named {col!r}")
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                xs.append(float(row[x_col]))
                ys.append(float(row[y_col]))
            except (TypeError, ValueError):
                raise ValueError(f"{csv_path}:{lineno}: non-numeric value") from None
    if not xs:
        raise ValueError(f"{csv_path}: no data rows")
    return xs, ys


def _num(v):
    return f"{v:.8f}"


def _tick(v):
    return f"{v:.4g}"


def svg_points(xs, ys, log_axes=False):
    """Map data to pixel coordinates inside the plot frame."""
    if log_axes:
        bad = [(x, y) for x, y in zip(xs, ys) if x <= 0 or y <= 0]
        if bad:
            raise ValueError(f"log axes need positive values, got {bad[0]}")
        xs = [math.log10(x) for x in xs]
        ys = [math.log10(y) for y in ys]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    return [
        (MARGIN["left"] + (x - x0) / (x1 - x0) * pw,
         MARGIN["top"] + (1.0 - (y - y0) / (y1 - y0)) * ph)
        for x, y in zip(xs, ys)
    ]


def emit_plot(csv_path, x_col, y_col, log_axes=False, out_svg=None, title=None):
    """Render one series as an SVG polyline; nothing is written on error."""
    xs, ys = read_columns(csv_path, x_col, y_col)
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    xs = [xs[i] for i in order]
    ys = [ys[i] for i in order]
    pts = svg_points(xs, ys, log_axes)
    title = title or f"{y_col} vs {x_col}" + (" (log-log)" if log_axes else "")
    left, top = MARGIN["left"], MARGIN["top"]
    right, bottom = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
        f'<line class="axis" x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{left}" y="{bottom + 18}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="11">{_tick(xs[0])}</text>',
        f'<text x="{right}" y="{bottom + 18}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="11">{_tick(xs[-1])}</text>',
        f'<text x="{left - 6}" y="{bottom}" text-anchor="end" font-family="sans-serif" '
        f'font-size="11">{_tick(min(ys))}</text>',
        f'<text x="{left - 6}" y="{top + 4}" text-anchor="end" font-family="sans-serif" '
        f'font-size="11">{_tick(max(ys))}</text>',
        f'<text x="{(left + right) / 2}" y="{HEIGHT - 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{escape(x_col)}</text>',
        f'<text x="18" y="{(top + bottom) / 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 18 {(top + bottom) / 2})">{escape(y_col)}</text>',
        '<polyline class="series" fill="none" stroke="#1f77b4" stroke-width="2" points="'
        + " ".join(f"{_num(x)},{_num(y)}" for x, y in pts) + '"/>',
        "</svg>",
    ]
    svg = "\n".join(lines) + "\n"
    if out_svg is not None:
        Path(out_svg).write_text(svg)
    return svg
