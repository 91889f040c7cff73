"""Dependency-free log-log line plots as standalone SVG."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

from sortmc._io import atomic_write_text
from sortmc.bench import BenchRecord
from sortmc.sort_core import AlgorithmId

RATIO_FLOOR = 1e-7
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
AXIS_LABELS = {
    "n": "array size n (elements)",
    "r": "swap ratio r (dimensionless)",
    "median_nanos": "median sort time (ns)",
    "min_nanos": "minimum sort time (ns)",
}


class LogAxis:
    """Maps values onto pixels on a base-10 log scale."""

    def __init__(self, vmin: float, vmax: float, p0: float, p1: float):
        if vmin <= 0 or vmax <= 0:
            raise ValueError("log axis needs positive bounds")
        lo = math.floor(math.log10(vmin))
        hi = math.ceil(math.log10(vmax))
        if hi == lo:
            hi = lo + 1
        self.decade_lo, self.decade_hi = lo, hi
        self.p0, self.p1 = p0, p1

    def to_px(self, v: float) -> float:
        t = (math.log10(v) - self.decade_lo) / (self.decade_hi - self.decade_lo)
        return self.p0 + t * (self.p1 - self.p0)

    def decades(self) -> range:
        return range(self.decade_lo, self.decade_hi + 1)


def _point(rec: BenchRecord, x: str, y: str) -> tuple[float, float]:
    if x == "r":
        if rec.r is None:
            raise ValueError(f"record {rec.algorithm.value} n={rec.n} has no swap ratio")
        xv = RATIO_FLOOR if rec.r == 0 else rec.r
    else:
        xv = getattr(rec, x)
    yv = getattr(rec, y)
    if xv <= 0 or yv <= 0:
        raise ValueError(
            f"non-positive value in record {rec.algorithm.value} n={rec.n} r={rec.r}: "
            f"{x}={xv}, {y}={yv}")
    return float(xv), float(yv)


def render_loglog_svg(records: list[BenchRecord], path, x: str = "n",
                      y: str = "median_nanos", title: str | None = None,
                      width: int = 720, height: int = 480) -> Path:
    """One polyline per algorithm on log-log axes, written atomically to ``path``."""
    if x not in ("n", "r"):
        raise ValueError(f"x axis must be 'n' or 'r', got {x!r}")
    records = [rec for rec in records if not rec.skipped]
    if not records:
        raise ValueError("no records to plot")
    series: dict[AlgorithmId, list[tuple[float, float]]] = {}
    for rec in records:
        series.setdefault(AlgorithmId(rec.algorithm), []).append(_point(rec, x, y))
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts]

    left, right, top, bottom = 90, width - 190, 40, height - 60
    xa = LogAxis(min(xs), max(xs), left, right)
    ya = LogAxis(min(ys), max(ys), bottom, top)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{(left + right) / 2:.1f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    out.append('<g class="grid" stroke="#dddddd" stroke-width="1">')
    for d in xa.decades():
        px = xa.to_px(10.0 ** d)
        out.append(f'<line x1="{px:.2f}" y1="{top}" x2="{px:.2f}" y2="{bottom}"/>')
    for d in ya.decades():
        py = ya.to_px(10.0 ** d)
        out.append(f'<line x1="{left}" y1="{py:.2f}" x2="{right}" y2="{py:.2f}"/>')
    out.append("</g>")
    out.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
               'fill="none" stroke="black"/>')
    for d in xa.decades():
        px = xa.to_px(10.0 ** d)
        out.append(f'<text x="{px:.2f}" y="{bottom + 18}" text-anchor="middle">1e{d}</text>')
    for d in ya.decades():
        py = ya.to_px(10.0 ** d)
        out.append(f'<text x="{left - 8}" y="{py + 4:.2f}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{(left + right) / 2:.1f}" y="{height - 18}" text-anchor="middle">'
               f'{escape(AXIS_LABELS[x])}</text>')
    out.append(f'<text x="20" y="{(top + bottom) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 20 {(top + bottom) / 2:.1f})">'
               f'{escape(AXIS_LABELS.get(y, y))}</text>')

    for idx, (alg, pts) in enumerate(series.items()):
        color = PALETTE[idx % len(PALETTE)]
        pts = sorted(pts)
        coords = " ".join(f"{xa.to_px(px):.2f},{ya.to_px(py):.2f}" for px, py in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                   f'points="{coords}"><title>{escape(alg.value)}</title></polyline>')
        ly = top + 16 + 20 * idx
        out.append(f'<g class="legend"><line x1="{right + 12}" y1="{ly}" x2="{right + 36}" '
                   f'y2="{ly}" stroke="{color}" stroke-width="2"/>'
                   f'<text x="{right + 42}" y="{ly + 4}">{escape(alg.value)}</text></g>')
    out.append("</svg>")

    return atomic_write_text(path, "\n".join(out) + "\n")
