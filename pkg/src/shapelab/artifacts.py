"""Writers for CSV, JSON and SVG artifacts. Every file carries the resolved config."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj, indent=None) -> str:
    return json.dumps(obj, default=_default, sort_keys=True, indent=indent, allow_nan=True)


def write_json(path, obj: dict, config: dict | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(obj)
    if config is not None:
        body["config"] = config
    path.write_text(dumps(body, indent=2) + "\n")
    return path


def write_csv(path, header, rows, config: dict | None = None):
    """CSV with an optional leading '# config: {...}' comment line, then the header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if config is not None:
            fh.write("# config: " + dumps(config) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def read_csv(path):
    """(header, rows as lists of strings), skipping '#' comment lines."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


# --------------------------------------------------------------------- SVG

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def line_plot(path, series, title="", xlabel="", ylabel="", logx=False, logy=False,
              config: dict | None = None, width=640, height=420):
    """Minimal self-contained SVG line plot.

    ``series`` is a list of dicts with keys label, x, y and optional dashed.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = []
    for s in series:
        xy = [(tx(x), ty(y)) for x, y in zip(s["x"], s["y"])
              if np.isfinite(x) and np.isfinite(y) and (not logx or x > 0) and (not logy or y > 0)]
        pts.append(xy)
    allx = [p[0] for xy in pts for p in xy] or [0.0, 1.0]
    ally = [p[1] for xy in pts for p in xy] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def X(v):
        return left + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">']
    if config is not None:
        out.append(f"<metadata>{escape(dumps(config))}</metadata>")
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    out.append(f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>')
    for i in range(5):
        vx = x0 + (x1 - x0) * i / 4
        vy = y0 + (y1 - y0) * i / 4
        lx = f"{10 ** vx:.3g}" if logx else f"{vx:.3g}"
        ly = f"{10 ** vy:.3g}" if logy else f"{vy:.3g}"
        out.append(f'<text x="{X(vx):.1f}" y="{top + ph + 16}" text-anchor="middle">{lx}</text>')
        out.append(f'<text x="{left - 6}" y="{Y(vy) + 4:.1f}" text-anchor="end">{ly}</text>')
    for i, (s, xy) in enumerate(zip(series, pts)):
        color = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="5,4"' if s.get("dashed") else ""
        if xy:
            d = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in xy)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{d}"/>')
            for a, b in xy:
                out.append(f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="2.5" fill="{color}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly}">{escape(s["label"])}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")
    return path
