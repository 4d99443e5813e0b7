"""Run the game over every pair for every threshold cell and aggregate."""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels, indicators
from .market_data import PriceUniverse
from .pairgame import FilterParams, Kind, ThresholdSet, TradeOutcome, check_history

FINE_STEP_BP = 100  # 0.01
COARSE_STEP_BP = 1000  # 0.1


def _regime(theta_lo: int, theta_hi: int, step: int) -> list[ThresholdSet]:
    return [
        ThresholdSet(t, e, 2 * t - e)
        for t in range(theta_lo, theta_hi + 1, step)
        for e in range(0, t, step)
    ]


@dataclass(frozen=True)
class GridSpec:
    name: str
    cells: tuple[ThresholdSet, ...]

    def __post_init__(self):
        if not self.cells:
            raise ValueError("empty grid")
        object.__setattr__(self, "cells", tuple(sorted(set(self.cells))))

    @classmethod
    def fine(cls) -> GridSpec:
        return cls("fine", tuple(_regime(100, 900, FINE_STEP_BP)))

    @classmethod
    def coarse(cls) -> GridSpec:
        return cls("coarse", tuple(_regime(1000, 10000, COARSE_STEP_BP)))

    @classmethod
    def default(cls) -> GridSpec:
        return cls("default", cls.fine().cells + cls.coarse().cells)

    @classmethod
    def named(cls, name: str) -> GridSpec:
        try:
            return {"default": cls.default, "coarse": cls.coarse, "fine": cls.fine}[name]()
        except KeyError:
            raise ValueError(f"unknown grid {name!r}") from None

    @classmethod
    def single(cls, theta: float, epsilon: float) -> GridSpec:
        return cls("single", (ThresholdSet.of(theta, epsilon),))

    @classmethod
    def for_theta(cls, theta: float) -> GridSpec:
        """Every epsilon below theta, stepping by theta's regime step."""
        t = ThresholdSet.of(theta, 0.0).theta_bp
        step = FINE_STEP_BP if t < COARSE_STEP_BP else COARSE_STEP_BP
        return cls("theta", tuple(ThresholdSet(t, e, 2 * t - e) for e in range(0, t, step)))


# cells whose winners feed the profit-vs-volatility scattergram: epsilon = 0.1*theta
SCATTER_FAMILY = tuple(ThresholdSet(t, t // 10, 2 * t - t // 10) for t in (1000, 2000, 3000))


@dataclass(frozen=True)
class CellResult:
    thresholds: ThresholdSet
    outcomes: tuple[TradeOutcome, ...]
    n_unresolved: int = 0

    @property
    def theta(self) -> float:
        return self.thresholds.theta

    @property
    def epsilon(self) -> float:
        return self.thresholds.epsilon

    @property
    def omega(self) -> float:
        return self.thresholds.omega

    @property
    def n_w(self) -> int:
        return sum(o.kind is Kind.WIN for o in self.outcomes)

    @property
    def n_l(self) -> int:
        return sum(o.kind is Kind.LOSE for o in self.outcomes)

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def p_w(self) -> float | None:
        return self.n_w / self.n if self.outcomes else None

    @property
    def eta(self) -> float | None:
        if not self.outcomes:
            return None
        return math.fsum(o.profit for o in self.outcomes) / self.n


def aggregate(thresholds: ThresholdSet, outcomes: Iterable[TradeOutcome]) -> CellResult:
    """Keep counted outcomes in canonical order; unresolved ones are only tallied."""
    outcomes = list(outcomes)
    counted = tuple(sorted(o for o in outcomes if o.counted))
    return CellResult(thresholds, counted, len(outcomes) - len(counted))


Histogram = dict  # bin start (days) -> count


def fpt_histograms(
    outcomes: Iterable[TradeOutcome], bin_width: int = 1
) -> tuple[Histogram, Histogram]:
    """Counts of first-passage times t_decision - t_start, split into wins and losses."""
    if bin_width < 1:
        raise ValueError("bin width must be at least one day")
    win, lose = Counter(), Counter()
    for o in outcomes:
        if o.kind is Kind.UNRESOLVED:
            continue
        b = (o.passage_time // bin_width) * bin_width
        (win if o.kind is Kind.WIN else lose)[b] += 1
    return dict(sorted(win.items())), dict(sorted(lose.items()))


@dataclass(frozen=True, order=True)
class ScatterPoint:
    theta: float
    pair: tuple[str, str]
    sigma: float
    eta: float


def scattergram(cells: Iterable[CellResult]) -> list[ScatterPoint]:
    """One point per winner: mean leg volatility at the start against its profit."""
    points = [
        ScatterPoint(c.theta, o.pair, o.mean_sigma, o.profit)
        for c in cells
        for o in c.outcomes
        if o.kind is Kind.WIN
    ]
    return sorted(points)


def enumerate_pairs(universe: PriceUniverse) -> Iterator[tuple[str, str]]:
    """Every unordered pair once, in canonical (sorted) order."""
    return combinations(universe.tickers, 2)


@dataclass
class Prepared:
    """Per-ticker arrays the pair kernels read, all on evaluation days 0..tau_max."""

    tickers: tuple[str, ...]
    g: np.ndarray  # rates
    sigma: np.ndarray
    sig_ok: np.ndarray
    xc: np.ndarray  # centered log-returns from the first defined one
    sx: np.ndarray
    vx: np.ndarray
    dx: np.ndarray  # windows recomputed directly
    w: int
    off: int  # day t reads correlation window t + off


def prepare(universe: PriceUniverse, filters: FilterParams) -> Prepared:
    check_history(universe, filters)
    tau, h, wu = filters.tau, filters.tau_max, universe.warm_up
    days = slice(wu, wu + h + 1)
    n = universe.n_tickers
    g = np.empty((n, h + 1))
    sigma = np.empty((n, h + 1))
    xc_rows, sx_rows, vx_rows, dx_rows = [], [], [], []
    w = tau - 1
    for k, p in enumerate(universe.prices):
        rates = indicators.rate_series(p, tau)
        g[k] = rates[days]
        sigma[k] = indicators.rolling_volatility(rates, tau, filters.volatility_mode)[days]
        lo, xc = indicators.centered_returns(indicators.log_return_series(p, tau))
        sx, vx, dx = indicators.window_moments(xc, w)
        xc_rows.append(xc)
        sx_rows.append(sx)
        vx_rows.append(vx)
        dx_rows.append(dx)
    with np.errstate(invalid="ignore"):
        sig_ok = (sigma > filters.sigma_min) & (sigma < filters.sigma_max)
    # first return sits at raw day tau-1, so window m ends the day before raw day m + 2*tau - 2
    off = wu - (2 * tau - 2)
    return Prepared(
        universe.tickers,
        g,
        sigma,
        sig_ok,
        np.ascontiguousarray(np.stack(xc_rows)),
        np.ascontiguousarray(np.stack(sx_rows)),
        np.ascontiguousarray(np.stack(vx_rows)),
        np.ascontiguousarray(np.stack(dx_rows)),
        w,
        off,
    )


def _row_shards(n: int, parts: int) -> list[tuple[int, int]]:
    """Split rows 0..n-1 so each shard holds about the same number of (i, j>i) pairs."""
    total = n * (n - 1) // 2
    shards, start, acc = [], 0, 0
    for i in range(n):
        acc += n - 1 - i
        if acc >= total * (len(shards) + 1) / parts and i + 1 > start:
            shards.append((start, i + 1))
            start = i + 1
    if start < n:
        shards.append((start, n))
    return shards


def default_workers() -> int:
    return os.cpu_count() or 1


@dataclass
class CellRun:
    cells: list[CellResult]
    tallies: dict = field(default_factory=dict)


def run_cells(
    universe: PriceUniverse,
    filters: FilterParams,
    cells: Sequence[ThresholdSet],
    workers: int | None = None,
) -> CellRun:
    """Play every pair in every cell. Results do not depend on ``workers``."""
    if workers is None:
        workers = default_workers()
    if workers < 1:
        raise ValueError("workers must be at least 1")
    prep = prepare(universe, filters)
    n = len(prep.tickers)
    thetas = np.array([c.theta for c in cells])
    epsilons = np.array([c.epsilon for c in cells])
    omegas = np.array([c.omega for c in cells])
    refresh = _kernels.REFRESH

    def screen(shard):
        i0, i1 = shard
        size = sum(n - 1 - i for i in range(i0, i1))
        out_i = np.empty(size, dtype=np.int64)
        out_j = np.empty(size, dtype=np.int64)
        k, undefined = _kernels.screen_rows(
            i0, i1, prep.xc, prep.sx, prep.vx, prep.dx, prep.sig_ok, prep.g, filters.rho_0,
            thetas.min(), omegas.max(), prep.w, prep.off, refresh, out_i, out_j,
        )
        return out_i[:k], out_j[:k], undefined

    shards = _row_shards(n, max(4 * workers, 1)) if n > 1 else []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        screened = list(pool.map(screen, shards))
    pi = np.concatenate([s[0] for s in screened]) if screened else np.empty(0, np.int64)
    pj = np.concatenate([s[1] for s in screened]) if screened else np.empty(0, np.int64)
    undefined = sum(s[2] for s in screened)

    m, c_n, n_t = len(pi), len(cells), prep.g.shape[1]
    kind = np.zeros((m, c_n), dtype=np.int64)
    t_start = np.zeros((m, c_n), dtype=np.int64)
    t_dec = np.zeros((m, c_n), dtype=np.int64)
    rho = np.zeros((m, n_t))

    def play(bounds):
        a, b = bounds
        _kernels.play_pairs(
            pi[a:b], pj[a:b], prep.xc, prep.sx, prep.vx, prep.dx, prep.sig_ok, prep.g,
            filters.rho_0, prep.w, prep.off, refresh, thetas, epsilons, omegas,
            filters.tau_max, kind[a:b], t_start[a:b], t_dec[a:b], rho[a:b],
        )

    chunk = max(1, -(-m // max(4 * workers, 1)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(play, [(a, min(a + chunk, m)) for a in range(0, m, chunk)]))

    per_cell: list[list[TradeOutcome]] = [[] for _ in cells]
    names = prep.tickers
    for p in range(m):
        i, j = int(pi[p]), int(pj[p])
        for c in np.flatnonzero(kind[p]):
            ts = int(t_start[p, c])
            d0 = abs(float(prep.g[i, ts]) - float(prep.g[j, ts]))
            k = int(kind[p, c])
            if k == _kernels.UNRESOLVED:
                td, d1, profit, kd = None, None, None, Kind.UNRESOLVED
            else:
                td = int(t_dec[p, c])
                d1 = abs(float(prep.g[i, td]) - float(prep.g[j, td]))
                profit = d0 - d1
                kd = Kind.WIN if k == _kernels.WIN else Kind.LOSE
            per_cell[c].append(TradeOutcome(
                (names[i], names[j]), ts, td, kd, d0, d1, profit,
                float(rho[p, ts]), float(prep.sigma[i, ts]), float(prep.sigma[j, ts]),
            ))
    results = [aggregate(cell, outs) for cell, outs in zip(cells, per_cell)]
    tallies = {
        "pairs": n * (n - 1) // 2,
        "screened_pairs": m,
        "undefined_rho_pair_days": int(undefined),
        "days_without_statistics": max(0, -prep.off),
    }
    return CellRun(results, tallies)


def run_cell(
    universe: PriceUniverse,
    filters: FilterParams,
    theta: float,
    epsilon: float,
    workers: int | None = None,
) -> CellResult:
    return run_cells(universe, filters, [ThresholdSet.of(theta, epsilon)], workers).cells[0]


@dataclass
class SweepReport:
    cells: list[CellResult]
    scatter_cells: list[CellResult]
    fpt_win: Histogram
    fpt_lose: Histogram
    scatter: list[ScatterPoint]
    metadata: dict
    bin_width: int = 1


def run_sweep(
    universe: PriceUniverse,
    filters: FilterParams,
    grid: GridSpec,
    workers: int | None = None,
    bin_width: int = 1,
    seed: int | None = None,
) -> SweepReport:
    """All grid cells, plus the epsilon = 0.1*theta family for the scattergram.

    First-passage histograms pool the counted outcomes of every grid cell.
    """
    extra = [c for c in SCATTER_FAMILY if c not in grid.cells]
    cells = list(grid.cells) + extra
    run = run_cells(universe, filters, cells, workers)
    by_cell = dict(zip(cells, run.cells))
    grid_results = [by_cell[c] for c in grid.cells]
    family = [by_cell[c] for c in SCATTER_FAMILY]
    win, lose = fpt_histograms((o for c in grid_results for o in c.outcomes), bin_width)
    metadata = {
        "filters": {
            "rho_0": filters.rho_0,
            "sigma_min": filters.sigma_min,
            "sigma_max": filters.sigma_max,
            "tau": filters.tau,
            "tau_max": filters.tau_max,
            "volatility_mode": filters.volatility_mode,
        },
        "grid": {
            "name": grid.name,
            "cells_bp": [[c.epsilon_bp, c.theta_bp, c.omega_bp] for c in grid.cells],
        },
        "scatter_cells_bp": [[c.epsilon_bp, c.theta_bp, c.omega_bp] for c in SCATTER_FAMILY],
        "bin_width_days": bin_width,
        "seed": seed,
        "input_digest": universe.digest(),
        "universe": {
            "n_tickers": universe.n_tickers,
            "n_days": universe.n_days,
            "warm_up": universe.warm_up,
            "evaluation_days": universe.evaluation_days,
            "first_day": universe.calendar.days[0].isoformat(),
            "first_evaluation_day": universe.calendar.days[universe.warm_up].isoformat(),
            "last_day": universe.calendar.days[-1].isoformat(),
            "dropped": list(universe.dropped),
        },
        "skips": dict(
            run.tallies,
            unresolved_by_cell={
                f"{c.epsilon_bp}/{c.theta_bp}": r.n_unresolved for c, r in zip(cells, run.cells)
            },
        ),
    }
    return SweepReport(grid_results, family, win, lose, scattergram(family), metadata, bin_width)


def cross_section(
    universe: PriceUniverse, filters: FilterParams, day: int
) -> tuple[np.ndarray, np.ndarray]:
    """All defined pair correlations and ticker volatilities on one evaluation day."""
    if not 0 <= day < universe.evaluation_days:
        raise ValueError(f"day {day} outside evaluation window 0..{universe.evaluation_days - 1}")
    tau = filters.tau
    if universe.warm_up < tau - 1:
        raise indicators.InsufficientHistory(f"warm_up too short for tau={tau}")
    raw = universe.warm_up + day
    sigmas, windows = [], []
    for p in universe.prices:
        rates = indicators.rate_series(p, tau)
        lo = raw - tau + 1
        if lo < tau - 1:
            raise indicators.InsufficientHistory(
                f"statistics undefined on evaluation day {day}; first defined day is "
                f"{2 * tau - 2 - universe.warm_up}"
            )
        sigmas.append(indicators.volatility(rates, raw, tau, filters.volatility_mode))
        windows.append(indicators.log_return_series(p, tau)[lo:raw])
    x = np.array(windows)
    x = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    ok = norms > 0
    z = x[ok] / norms[ok, None]
    corr = np.clip(z @ z.T, -1.0, 1.0)
    rho = corr[np.triu_indices(len(z), k=1)]
    return rho, np.array(sigmas)
