"""Hand-emitted SVG figures: the per-frame error scatter and the
error-vs-crowd-size curve. No plotting dependency; output is deterministic."""
from __future__ import annotations

import math
from pathlib import Path

from .evalharness import CrowdBin
from .metrics import ScatterPoint

_W, _H = 640, 480
_MARGIN = 56


def _axes(title: str, x_label: str, y_label: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{_MARGIN}" y1="{_H - _MARGIN}" x2="{_W - _MARGIN}" y2="{_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{_H - _MARGIN}" stroke="black"/>',
        f'<text x="{_W // 2}" y="{_H - 16}" text-anchor="middle" font-size="12">{x_label}</text>',
        f'<text x="16" y="{_H // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H // 2})">{y_label}</text>',
    ]


def _scale(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if not math.isfinite(lo) or not math.isfinite(hi):
        lo, hi = 0.0, 1.0
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def _to_px(v: float, lo: float, hi: float, out_lo: float, out_hi: float) -> float:
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)


def write_scatter_svg(points: list[ScatterPoint], path) -> None:
    """Per-frame absolute error (x) vs per-person absolute error (y); frames
    with equal person counts line up through the origin."""
    parts = _axes(
        "per-frame vs per-person absolute error",
        "absolute error (dm3)",
        "per-person absolute error (dm3)",
    )
    xs = [p.ae for p in points] or [0.0]
    ys = [p.ppae for p in points] or [0.0]
    x_lo, x_hi = _scale([0.0] + xs)
    y_lo, y_hi = _scale([0.0] + ys)
    parts.append(f'<text x="{_MARGIN}" y="{_H - _MARGIN + 16}" font-size="10">{x_lo:.3g}</text>')
    parts.append(f'<text x="{_W - _MARGIN}" y="{_H - _MARGIN + 16}" text-anchor="end" font-size="10">{x_hi:.3g}</text>')
    parts.append(f'<text x="{_MARGIN - 4}" y="{_MARGIN}" text-anchor="end" font-size="10">{y_hi:.3g}</text>')
    parts.append(f'<text x="{_MARGIN - 4}" y="{_H - _MARGIN}" text-anchor="end" font-size="10">{y_lo:.3g}</text>')
    for p in points:
        cx = _to_px(p.ae, x_lo, x_hi, _MARGIN, _W - _MARGIN)
        cy = _to_px(p.ppae, y_lo, y_hi, _H - _MARGIN, _MARGIN)
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="steelblue" fill-opacity="0.7"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def write_bins_svg(bins: list[CrowdBin], path) -> None:
    """MAE and PP-MAE as polylines over the crowd-size bin midpoints."""
    parts = _axes("error vs crowd size", "persons per frame (bin midpoint)", "error (dm3)")
    filled = [b for b in bins if b.report is not None]
    if filled:
        mids = [
            (b.lo + min(b.hi, b.lo * 2 + 10)) / 2 if math.isinf(b.hi) else (b.lo + b.hi) / 2
            for b in filled
        ]
        x_lo, x_hi = _scale(mids)
        series = {
            "mae": ([b.report.mae for b in filled], "firebrick"),
            "ppmae": ([b.report.ppmae for b in filled], "steelblue"),
        }
        all_vals = [v for vals, _ in series.values() for v in vals if math.isfinite(v)]
        y_lo, y_hi = _scale([0.0] + all_vals)
        for name, (vals, color) in series.items():
            pts = " ".join(
                f"{_to_px(x, x_lo, x_hi, _MARGIN, _W - _MARGIN):.2f},"
                f"{_to_px(v, y_lo, y_hi, _H - _MARGIN, _MARGIN):.2f}"
                for x, v in zip(mids, vals)
                if math.isfinite(v)
            )
            if pts:
                parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MARGIN}" y="{_MARGIN}" text-anchor="end" font-size="10" fill="firebrick">mae</text>')
        parts.append(f'<text x="{_W - _MARGIN}" y="{_MARGIN + 14}" text-anchor="end" font-size="10" fill="steelblue">ppmae</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
