"""Report files: cell table, first-passage histograms, scattergram, metadata."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .pairgame import BP
from .sweep import CellResult, SweepReport

CELLS_FILE = "cells.csv"
HISTOGRAM_FILE = "fpt_histogram.csv"
SCATTER_FILE = "scatter.csv"
METADATA_FILE = "metadata.json"

CELLS_HEADER = "epsilon_pct,theta_pct,omega_pct,n_w,n_l,p_w_pct,eta"
HISTOGRAM_HEADER = "bin_start_days,bin_width_days,count,kind"
SCATTER_HEADER = "sigma,eta_pct,theta_pct"
NULL = "null"


def pct(bp: int) -> str:
    """Basis points as an exact percent string: 1000 -> '10', 150 -> '1.5'."""
    whole, frac = divmod(bp, 100)
    return str(whole) if frac == 0 else f"{whole}.{frac:02d}".rstrip("0")


def _cell_row(c: CellResult) -> str:
    t = c.thresholds
    p_w = NULL if c.p_w is None else f"{100 * c.p_w:.4f}"
    eta = NULL if c.eta is None else f"{c.eta:.10f}"
    return f"{pct(t.epsilon_bp)},{pct(t.theta_bp)},{pct(t.omega_bp)},{c.n_w},{c.n_l},{p_w},{eta}"


def cells_csv(report: SweepReport) -> str:
    return "\n".join([CELLS_HEADER] + [_cell_row(c) for c in report.cells]) + "\n"


def histogram_csv(report: SweepReport) -> str:
    lines = [HISTOGRAM_HEADER]
    for kind, hist in (("win", report.fpt_win), ("lose", report.fpt_lose)):
        lines += [f"{start},{report.bin_width},{count},{kind}" for start, count in hist.items()]
    return "\n".join(lines) + "\n"


def scatter_csv(report: SweepReport) -> str:
    lines = [SCATTER_HEADER]
    lines += [f"{p.sigma:.10f},{100 * p.eta:.8f},{pct(round(p.theta * BP))}" for p in report.scatter]
    return "\n".join(lines) + "\n"


def metadata_json(report: SweepReport) -> str:
    return json.dumps(report.metadata, indent=2, sort_keys=True) + "\n"


def write_report(report: SweepReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        CELLS_FILE: cells_csv(report),
        HISTOGRAM_FILE: histogram_csv(report),
        SCATTER_FILE: scatter_csv(report),
        METADATA_FILE: metadata_json(report),
    }
    paths = {}
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        paths[name] = path
    return paths


def format_table(cells: list[CellResult]) -> str:
    """Cell table laid out like the published tables, with eta appended."""
    head = f"{'eps[%]':>7} {'theta[%]':>8} {'Omega[%]':>8} {'N_w':>6} {'N_l':>6} {'p_w[%]':>7} {'eta':>9}"
    rows = [head, "-" * len(head)]
    for c in cells:
        t = c.thresholds
        p_w = "-" if c.p_w is None else f"{100 * c.p_w:.1f}"
        eta = "-" if c.eta is None else f"{c.eta:+.4f}"
        rows.append(
            f"{pct(t.epsilon_bp):>7} {pct(t.theta_bp):>8} {pct(t.omega_bp):>8} "
            f"{c.n_w:>6} {c.n_l:>6} {p_w:>7} {eta:>9}"
        )
    return "\n".join(rows)


def binned_csv(values: np.ndarray, edges: np.ndarray, kind: str) -> list[str]:
    counts, _ = np.histogram(values, bins=edges)
    width = edges[1] - edges[0]
    return [f"{lo:.4f},{width:.4f},{n},{kind}" for lo, n in zip(edges[:-1], counts)]
