"""Deterministic report writers: canonical JSON, RFC-4180 CSV, static SVG.

Everything here is reproducible byte for byte from the same inputs: JSON is
emitted with sorted keys, CSV uses CRLF line endings, and the SVG writer
builds plain SVG 1.1 line charts with no timestamps or generator metadata.
Timing information belongs only in the run manifest, under its own key, so
reports can be compared across runs directly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj)!r}")


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj))
    return path


def config_hash(config_dict) -> str:
    payload = json.dumps(to_jsonable(config_dict), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)  # csv defaults to CRLF line endings
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
    return path


def make_manifest(config_dict, summary, timings):
    from . import __version__

    return {
        "config": to_jsonable(config_dict),
        "config_hash": config_hash(config_dict),
        "versions": {
            "minveclab": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "summary": to_jsonable(summary),
        "timings": to_jsonable(timings),
    }


# -- SVG line charts ---------------------------------------------------------

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
            "#17becf", "#7f7f7f"]


def _fmt(v):
    return f"{v:.6g}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min(s for s in (mag, 2 * mag, 2.5 * mag, 5 * mag, 10 * mag) if s >= raw)
    first = np.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


def line_chart_svg(series, title="", xlabel="", ylabel="", *, log_y=False,
                   width=720, height=460) -> str:
    """Plain SVG 1.1 line chart.

    series: mapping label -> (xs, ys).  Nonpositive values are dropped in
    log mode.  Output is deterministic for identical inputs.
    """
    left, right, top, bottom = 72, 24, 42, 58
    pw, ph = width - left - right, height - top - bottom
    clean = {}
    for label, (xs, ys) in series.items():
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if log_y:
            keep &= ys > 0
        if np.any(keep):
            clean[label] = (xs[keep], np.log10(ys[keep]) if log_y else ys[keep])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    if not clean:
        parts.append(
            f'<text x="{width/2:.1f}" y="{height/2:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">no finite data</text></svg>'
        )
        return "\n".join(parts)
    all_x = np.concatenate([v[0] for v in clean.values()])
    all_y = np.concatenate([v[1] for v in clean.values()])
    x_lo, x_hi = float(np.min(all_x)), float(np.max(all_x))
    y_lo, y_hi = float(np.min(all_y)), float(np.max(all_y))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def X(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def Y(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    parts.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#444" stroke-width="1"/>'
    )
    for t in _ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{X(t):.2f}" y1="{top+ph}" x2="{X(t):.2f}" '
            f'y2="{top+ph+5}" stroke="#444"/>'
            f'<text x="{X(t):.2f}" y="{top+ph+20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(t)}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        label = f"1e{_fmt(t)}" if log_y else _fmt(t)
        parts.append(
            f'<line x1="{left-5}" y1="{Y(t):.2f}" x2="{left}" '
            f'y2="{Y(t):.2f}" stroke="#444"/>'
            f'<line x1="{left}" y1="{Y(t):.2f}" x2="{left+pw}" y2="{Y(t):.2f}" '
            f'stroke="#ddd" stroke-width="0.6"/>'
            f'<text x="{left-8}" y="{Y(t)+4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{label}</text>'
        )
    for i, (label, (xs, ys)) in enumerate(clean.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.6"/>'
        )
        for x, y in zip(xs, ys):
            parts.append(
                f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="2.4" fill="{color}"/>'
            )
        parts.append(
            f'<rect x="{left+pw-150}" y="{top+8+i*18}" width="12" height="3" '
            f'fill="{color}"/>'
            f'<text x="{left+pw-132}" y="{top+14+i*18}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    parts.append(
        f'<text x="{left+pw/2:.1f}" y="{height-14}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{top+ph/2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {top+ph/2:.1f})">{ylabel}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(path, svg_text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg_text)
    return path
