"""Report files for a finished experiment.

``report.csv`` must be byte-identical across reruns of the same config, so
wall-clock time is left blank there unless ``include_timing`` is set.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .experiment import MetricsReport

REPORT_COLUMNS = (
    "setting_r",
    "beta",
    "n",
    "a_n",
    "b_n",
    "boundary_size",
    "rel_mse_mean",
    "rel_mse_sd",
    "precision_mean",
    "recall_mean",
    "iters_mean",
    "wall_ms",
)

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".12g")


def write_report_csv(report: MetricsReport, path, include_timing: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in report.rows:
            vals = [_fmt(getattr(row, c)) for c in REPORT_COLUMNS[:-1]]
            vals.append(_fmt(row.wall_ms) if include_timing else "")
            w.writerow(vals)


def write_failures_csv(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setting_r", "beta", "k", "error"])
        for f in report.failures:
            w.writerow([f.r, _fmt(report.config.beta_grid[f.beta_index]), f.k, f.error])


def render_svg(report: MetricsReport, width: int = 640, height: int = 420) -> str:
    """Mean relative MSE against beta, one polyline per setting, +-1 SD whiskers."""
    cfg = report.config
    left, right, top, bottom = 70, 130, 30, 55
    pw, ph = width - left - right, height - top - bottom
    betas = np.array(cfg.beta_grid, dtype=float)
    lo_vals, hi_vals = [], []
    for row in report.rows:
        if math.isfinite(row.rel_mse_mean):
            lo_vals.append(row.rel_mse_mean - row.rel_mse_sd)
            hi_vals.append(row.rel_mse_mean + row.rel_mse_sd)
    y_lo = min(0.0, min(lo_vals)) if lo_vals else 0.0
    y_hi = max(hi_vals) if hi_vals else 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    x_lo, x_hi = float(betas.min()), float(betas.max())
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    def sx(b):
        return left + (b - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return top + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for b in betas:
        out.append(f'<line x1="{sx(b):.2f}" y1="{top + ph}" x2="{sx(b):.2f}" y2="{top + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{sx(b):.2f}" y="{top + ph + 18}" text-anchor="middle">{b:g}</text>')
    for v in np.linspace(y_lo, y_hi, 5):
        out.append(f'<line x1="{left - 5}" y1="{sy(v):.2f}" x2="{left}" y2="{sy(v):.2f}" stroke="#444"/>')
        out.append(f'<text x="{left - 8}" y="{sy(v) + 4:.2f}" text-anchor="end">{v:.2f}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">beta</text>')
    out.append(
        f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2})">relative MSE</text>'
    )
    for i, r in enumerate(cfg.r_values):
        color = _COLORS[i % len(_COLORS)]
        rows = [row for row in report.rows if row.setting_r == r and math.isfinite(row.rel_mse_mean)]
        pts = " ".join(f"{sx(row.beta):.2f},{sy(row.rel_mse_mean):.2f}" for row in rows)
        out.append(f'<g class="setting" data-r="{r}">')
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for row in rows:
            x = sx(row.beta)
            y1, y2 = sy(row.rel_mse_mean - row.rel_mse_sd), sy(row.rel_mse_mean + row.rel_mse_sd)
            out.append(f'<line x1="{x:.2f}" y1="{y1:.2f}" x2="{x:.2f}" y2="{y2:.2f}" stroke="{color}"/>')
            out.append(f'<circle cx="{x:.2f}" cy="{sy(row.rel_mse_mean):.2f}" r="3" fill="{color}"/>')
        out.append("</g>")
        ly = top + 15 + 18 * i
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 40}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 46}" y="{ly + 4}">r = {r}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: MetricsReport, out_dir, include_timing: bool = False) -> dict:
    """Write report.csv, mse_vs_beta.svg, config.resolved.json and failures.csv.

    Returns the written paths keyed by short name.
    """
    if not report.rows:
        raise ValueError("empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.csv",
        "plot": out / "mse_vs_beta.svg",
        "config": out / "config.resolved.json",
        "failures": out / "failures.csv",
    }
    write_report_csv(report, paths["report"], include_timing)
    paths["plot"].write_text(render_svg(report), encoding="utf-8")
    paths["config"].write_text(json.dumps(report.config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_failures_csv(report, paths["failures"])
    return paths
