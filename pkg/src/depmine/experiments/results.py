"""Result tables, deterministic CSV/JSON emission, and static SVG charts.

Floats are printed with a fixed %.12g format and rows in sorted order, so
re-running an experiment with the same config overwrites byte-identical
files. The SVG writer is template-based with no timestamps for the same
reason.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class ResultRow:
    condition: str
    seed: int
    metric: str
    value: float


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def add(self, condition, seed, metric, value):
        self.rows.append(ResultRow(condition, int(seed), metric, float(value)))

    def values(self, condition, metric):
        return [r.value for r in self.rows if r.condition == condition and r.metric == metric]

    def mean(self, condition, metric):
        vals = self.values(condition, metric)
        if not vals:
            raise ConfigError(f"no rows for ({condition}, {metric})")
        return float(np.mean(vals))

    def aggregates(self):
        seen = []
        for r in self.rows:
            key = (r.condition, r.metric)
            if key not in seen:
                seen.append(key)
        out = []
        for condition, metric in sorted(seen):
            vals = self.values(condition, metric)
            n = len(vals)
            mean = float(np.mean(vals))
            ci = 1.96 * float(np.std(vals, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
            out.append(
                {"condition": condition, "metric": metric, "n": n,
                 "mean": mean, "ci95_halfwidth": ci}
            )
        return out

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r.condition, r.metric, r.seed))


def _fmt(v) -> str:
    return f"{float(v):.12g}"


def write_csv(table: ResultTable, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row_type", "condition", "seed", "metric", "value", "ci95_halfwidth"])
        for r in table.sorted_rows():
            w.writerow(["raw", r.condition, r.seed, r.metric, _fmt(r.value), ""])
        for agg in table.aggregates():
            w.writerow(["aggregate", agg["condition"], "", agg["metric"],
                        _fmt(agg["mean"]), _fmt(agg["ci95_halfwidth"])])


def write_json(table: ResultTable, checks, path):
    payload = {
        "rows": [
            {"condition": r.condition, "seed": r.seed, "metric": r.metric,
             "value": float(_fmt(r.value))}
            for r in table.sorted_rows()
        ],
        "aggregates": [
            {**a, "mean": float(_fmt(a["mean"])),
             "ci95_halfwidth": float(_fmt(a["ci95_halfwidth"]))}
            for a in table.aggregates()
        ],
        "checks": {k: bool(v) for k, v in sorted(checks.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Hand-rolled SVG charts (no plotting dependency, no timestamps)

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 30, 60


def _scale(vmin, vmax):
    if vmax <= vmin:
        vmax = vmin + 1.0
    span = vmax - vmin
    return vmin - 0.05 * span, vmax + 0.05 * span


def _y_px(v, lo, hi):
    return _MT + (_H - _MT - _MB) * (1.0 - (v - lo) / (hi - lo))


def _svg_header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif">{title}</text>',
    ]


def _axes(lo, hi, parts):
    x0, x1 = _ML, _W - _MR
    y0, y1 = _y_px(lo, lo, hi), _y_px(hi, lo, hi)
    parts.append(f'<line x1="{x0}" y1="{y0:.1f}" x2="{x1}" y2="{y0:.1f}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0:.1f}" x2="{x0}" y2="{y1:.1f}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * (hi - lo)
        y = _y_px(v, lo, hi)
        parts.append(
            f'<text x="{x0 - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="11" '
            f'font-family="sans-serif">{v:.3g}</text>'
        )
        parts.append(f'<line x1="{x0 - 4}" y1="{y:.1f}" x2="{x0}" y2="{y:.1f}" stroke="black"/>')


def _whisker(parts, x, mean, ci, lo, hi, color):
    if ci <= 0:
        return
    ytop, ybot = _y_px(mean + ci, lo, hi), _y_px(mean - ci, lo, hi)
    parts.append(f'<line x1="{x:.1f}" y1="{ytop:.1f}" x2="{x:.1f}" y2="{ybot:.1f}" stroke="{color}"/>')
    for y in (ytop, ybot):
        parts.append(f'<line x1="{x - 4:.1f}" y1="{y:.1f}" x2="{x + 4:.1f}" y2="{y:.1f}" stroke="{color}"/>')


def svg_line_chart(points, title, path, xlabel=""):
    """points: list of (x_value, label, mean, ci). Line through means."""
    values = [p[2] for p in points]
    cis = [p[3] for p in points]
    lo, hi = _scale(min(v - c for v, c in zip(values, cis)),
                    max(v + c for v, c in zip(values, cis)))
    parts = _svg_header(title)
    _axes(lo, hi, parts)
    n = len(points)
    xs = [_ML + (_W - _ML - _MR) * (k + 0.5) / n for k in range(n)]
    poly = " ".join(f"{x:.1f},{_y_px(v, lo, hi):.1f}" for x, v in zip(xs, values))
    parts.append(f'<polyline points="{poly}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for x, (xv, label, mean, ci) in zip(xs, points):
        y = _y_px(mean, lo, hi)
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="steelblue"/>')
        _whisker(parts, x, mean, ci, lo, hi, "steelblue")
        parts.append(
            f'<text x="{x:.1f}" y="{_H - _MB + 18}" text-anchor="middle" font-size="11" '
            f'font-family="sans-serif">{label}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 14}" text-anchor="middle" '
            f'font-size="12" font-family="sans-serif">{xlabel}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def svg_bar_chart(bars, title, path):
    """bars: list of (label, mean, ci)."""
    values = [b[1] for b in bars]
    cis = [b[2] for b in bars]
    lo, hi = _scale(min(0.0, min(v - c for v, c in zip(values, cis))),
                    max(v + c for v, c in zip(values, cis)))
    parts = _svg_header(title)
    _axes(lo, hi, parts)
    n = len(bars)
    slot = (_W - _ML - _MR) / n
    width = slot * 0.6
    y_base = _y_px(max(lo, 0.0), lo, hi)
    for k, (label, mean, ci) in enumerate(bars):
        xc = _ML + slot * (k + 0.5)
        y = _y_px(mean, lo, hi)
        parts.append(
            f'<rect x="{xc - width / 2:.1f}" y="{min(y, y_base):.1f}" width="{width:.1f}" '
            f'height="{abs(y_base - y):.1f}" fill="steelblue"/>'
        )
        _whisker(parts, xc, mean, ci, lo, hi, "black")
        parts.append(
            f'<text x="{xc:.1f}" y="{_H - _MB + 18}" text-anchor="middle" font-size="11" '
            f'font-family="sans-serif">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_outputs(table: ResultTable, out_dir, experiment: str, checks=None):
    """Write results.csv, results.json, and the experiment's chart."""
    checks = checks or {}
    os.makedirs(out_dir, exist_ok=True)
    write_csv(table, os.path.join(out_dir, "results.csv"))
    write_json(table, checks, os.path.join(out_dir, "results.json"))
    aggs = table.aggregates()
    chart = os.path.join(out_dir, "chart.svg")
    if experiment == "case-study":
        points = []
        for a in aggs:
            cond = a["condition"]
            if cond.startswith("specific-"):
                points.append((int(cond.split("-")[1]), cond, a["mean"], a["ci95_halfwidth"]))
        points.sort()
        extra = [a for a in aggs if a["condition"] == "no-pretrain"]
        if extra:
            points.append((1000, "no-pretrain", extra[0]["mean"], extra[0]["ci95_halfwidth"]))
        svg_line_chart(points, "dev accuracy vs share of final-word masks", chart,
                       xlabel="condition")
    else:
        bars = [(a["condition"], a["mean"], a["ci95_halfwidth"]) for a in aggs]
        svg_bar_chart(bars, experiment, chart)
    return [os.path.join(out_dir, n) for n in ("results.csv", "results.json", "chart.svg")]
