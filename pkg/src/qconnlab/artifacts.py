"""Writers for ``results.csv``, ``report.json`` and ``plot.svg``.

The CSV and SVG depend only on the experiment outcome, so identical configs
give identical bytes; wall-clock data goes into ``report.json`` only.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .experiments import Outcome, Plot


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(outcome: Outcome, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(outcome.columns)
        for row in outcome.rows:
            w.writerow([_cell(v) for v in row])
    return path


def jsonable(obj):
    """Plain-JSON copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# svg

_W, _H = 640, 420
_L, _R, _T, _B = 80, 170, 40, 60
_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _decades(lo: float, hi: float):
    a, b = math.floor(lo), math.ceil(hi)
    if a == b:
        b = a + 1
    return a, b


def render_svg(plot: Plot | None) -> str:
    """Log-log polylines; series with no positive points are skipped."""
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">\n'
    body = [f'<rect width="{_W}" height="{_H}" fill="white"/>']
    series = []
    if plot is not None:
        for label, (xs, ys) in plot.series.items():
            pts = [(float(x), float(y)) for x, y in zip(xs, ys) if x > 0 and y > 0 and math.isfinite(y)]
            if pts:
                series.append((label, pts))
    if not series:
        title = "no log-log data" if plot is None else plot.title
        body.append(f'<text x="{_W / 2}" y="{_H / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>')
        return head + "\n".join(body) + "\n</svg>\n"
    lx = [math.log10(x) for _, p in series for x, _ in p]
    ly = [math.log10(y) for _, p in series for _, y in p]
    x0, x1 = _decades(min(lx), max(lx))
    y0, y1 = _decades(min(ly), max(ly))
    pw, ph = _W - _L - _R, _H - _T - _B

    def sx(v):
        return _L + (math.log10(v) - x0) / (x1 - x0) * pw

    def sy(v):
        return _T + (y1 - math.log10(v)) / (y1 - y0) * ph

    body.append(f'<rect x="{_L}" y="{_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for k in range(x0, x1 + 1):
        x = _L + (k - x0) / (x1 - x0) * pw
        body.append(f'<line x1="{x:.2f}" y1="{_T + ph}" x2="{x:.2f}" y2="{_T + ph + 5}" stroke="black"/>')
        body.append(f'<text x="{x:.2f}" y="{_T + ph + 20}" text-anchor="middle" font-size="11">1e{k}</text>')
    ystep = max(1, (y1 - y0) // 8)
    for k in range(y0, y1 + 1, ystep):
        y = _T + (y1 - k) / (y1 - y0) * ph
        body.append(f'<line x1="{_L - 5}" y1="{y:.2f}" x2="{_L}" y2="{y:.2f}" stroke="black"/>')
        body.append(f'<text x="{_L - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">1e{k}</text>')
    for i, (label, pts) in enumerate(series):
        col = _COLOURS[i % len(_COLOURS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        body.append(f'<polyline points="{coords}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for x, y in pts:
            body.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{col}"/>')
        ly_ = _T + 14 + 18 * i
        body.append(f'<line x1="{_W - _R + 12}" y1="{ly_}" x2="{_W - _R + 32}" y2="{ly_}" stroke="{col}" stroke-width="2"/>')
        body.append(f'<text x="{_W - _R + 38}" y="{ly_ + 4}" font-size="11">{escape(label)}</text>')
    body.append(f'<text x="{_L + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(plot.title)}</text>')
    body.append(f'<text x="{_L + pw / 2}" y="{_H - 15}" text-anchor="middle" font-size="12">{escape(plot.xlabel)}</text>')
    body.append(
        f'<text x="18" y="{_T + ph / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {_T + ph / 2})">{escape(plot.ylabel)}</text>'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def write_svg(plot: Plot | None, path) -> Path:
    path = Path(path)
    path.write_text(render_svg(plot))
    return path
