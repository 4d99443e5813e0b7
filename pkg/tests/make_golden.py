"""Freeze golden report files from the brute-force reference simulator.

Run from the repository root after changing a bundled fixture:

    python3 tests/make_golden.py

Only the price generator is shared with the package; grid enumeration,
the game, aggregation and formatting are all redone here.
"""

import math
import sys
from collections import Counter
from itertools import combinations
from pathlib import Path

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from reference_sim import Pair, Ticker, simulate  # noqa: E402

from fptrade.market_data import SyntheticSpec, generate_synthetic  # noqa: E402

DATA = HERE / "data"
GOLDEN = DATA / "golden"

TAU = 250
TAU_MAX = 250
WARM_UP = 2 * TAU - 2
RHO0, SIGMA_MIN, SIGMA_MAX = 0.6, 0.05, 0.2


def grid_bp():
    cells = [(t, e) for t in range(100, 1000, 100) for e in range(0, t, 100)]
    cells += [(t, e) for t in range(1000, 10001, 1000) for e in range(0, t, 1000)]
    return sorted(cells)


FAMILY_BP = [(1000, 100), (2000, 200), (3000, 300)]


def pct(bp):
    s = f"{bp / 100:.2f}".rstrip("0").rstrip(".")
    return s


def play_all(spec_path, cells_bp):
    spec = SyntheticSpec.from_json(spec_path)
    universe = generate_synthetic(spec)
    tickers = {name: Ticker(p, TAU) for name, p in zip(universe.tickers, universe.prices)}
    results = {}
    for a, b in combinations(sorted(tickers), 2):
        pair = Pair(tickers[a], tickers[b])
        for t_bp, e_bp in cells_bp:
            theta, eps = t_bp / 10000, e_bp / 10000
            omega = (2 * t_bp - e_bp) / 10000
            out = simulate(pair, WARM_UP, TAU_MAX, RHO0, SIGMA_MIN, SIGMA_MAX, theta, eps, omega)
            if out is not None:
                results.setdefault((t_bp, e_bp), []).append(((a, b), out))
    return tickers, results


def histogram_lines(results, cells_bp):
    win, lose = Counter(), Counter()
    for cell in cells_bp:
        for _, (kind, t0, t1, _) in results.get(cell, []):
            if kind == "win":
                win[t1 - t0] += 1
            elif kind == "lose":
                lose[t1 - t0] += 1
    lines = ["bin_start_days,bin_width_days,count,kind"]
    lines += [f"{b},1,{win[b]},win" for b in sorted(win)]
    lines += [f"{b},1,{lose[b]},lose" for b in sorted(lose)]
    return lines


def main():
    grid = grid_bp()
    cells = sorted(set(grid) | set(FAMILY_BP))
    tickers, results = play_all(DATA / "golden_spec.json", cells)

    rows = ["epsilon_pct,theta_pct,omega_pct,n_w,n_l,p_w_pct,eta"]
    for t_bp, e_bp in grid:
        counted = [o for _, o in results.get((t_bp, e_bp), []) if o[0] != "unresolved"]
        n_w = sum(o[0] == "win" for o in counted)
        n_l = len(counted) - n_w
        if counted:
            p_w = f"{100 * (n_w / len(counted)):.4f}"
            eta = f"{math.fsum(o[3] for o in counted) / len(counted):.10f}"
        else:
            p_w = eta = "null"
        rows.append(f"{pct(e_bp)},{pct(t_bp)},{pct(2 * t_bp - e_bp)},{n_w},{n_l},{p_w},{eta}")

    points = []
    for t_bp, e_bp in FAMILY_BP:
        for (a, b), (kind, t0, _, profit) in results.get((t_bp, e_bp), []):
            if kind == "win":
                k = WARM_UP + t0
                sigma = (tickers[a].sigma(k) + tickers[b].sigma(k)) / 2
                points.append((t_bp / 10000, (a, b), sigma, profit, t_bp))
    points.sort()
    scatter = ["sigma,eta_pct,theta_pct"]
    scatter += [f"{s:.10f},{100 * y:.8f},{pct(t_bp)}" for _, _, s, y, t_bp in points]

    GOLDEN.mkdir(exist_ok=True)
    (GOLDEN / "cells.csv").write_text("\n".join(rows) + "\n")
    (GOLDEN / "fpt_histogram.csv").write_text("\n".join(histogram_lines(results, grid)) + "\n")
    (GOLDEN / "scatter.csv").write_text("\n".join(scatter) + "\n")
    winners = [p[3] for p in points]
    print(f"golden: {len(rows) - 1} cells, {len(points)} scatter points,"
          f" min winner profit {min(winners) if winners else None!r}")

    _, mr = play_all(DATA / "mean_reverting.json", grid)
    (DATA / "mean_reverting_fpt.csv").write_text("\n".join(histogram_lines(mr, grid)) + "\n")
    print("mean-reverting histogram written")


if __name__ == "__main__":
    main()
