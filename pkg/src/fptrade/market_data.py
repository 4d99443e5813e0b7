"""Daily price ingestion, calendar alignment and synthetic universes."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np

from .indicators import log_return_series

DEFAULT_TAU = 250
CSV_HEADER = ("date", "ticker", "adj_close")


class MarketDataError(ValueError):
    """Raised for malformed input files or infeasible universes."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def default_warm_up(tau: int) -> int:
    """Leading days needed so that sigma and rho exist on the first evaluation day.

    The rate looks back tau-1 days and the rolling statistics look back another
    tau-1 days over the rates, hence 2*tau - 2.
    """
    return 2 * tau - 2


@dataclass(frozen=True)
class TradingCalendar:
    days: tuple[dt.date, ...]

    def __post_init__(self):
        for a, b in zip(self.days, self.days[1:]):
            if not a < b:
                raise MarketDataError(f"calendar not strictly increasing at {b.isoformat()}")

    def __len__(self) -> int:
        return len(self.days)


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    prices: np.ndarray

    def __post_init__(self):
        if not np.all(self.prices > 0):
            raise MarketDataError(f"non-positive price in series {self.ticker}")


@dataclass(frozen=True)
class PriceUniverse:
    """Calendar-aligned price matrix, one row per ticker; rows are stored in ticker order.

    ``prices[k, d]`` is the adjusted close of ``tickers[k]`` on ``calendar.days[d]``.
    Evaluation day ``t = 0`` is raw day ``warm_up``.
    """

    calendar: TradingCalendar
    tickers: tuple[str, ...]
    prices: np.ndarray
    warm_up: int
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        prices = np.array(self.prices, dtype=np.float64, copy=True)
        if prices.ndim != 2 or prices.shape != (len(self.tickers), len(self.calendar)):
            raise MarketDataError(
                f"price matrix shape {prices.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.calendar)} days"
            )
        if len(set(self.tickers)) != len(self.tickers):
            raise MarketDataError("duplicate ticker identifiers")
        if not np.all(prices > 0):
            raise MarketDataError("non-positive price in universe")
        if not 0 <= self.warm_up < len(self.calendar):
            raise MarketDataError(
                f"need more than warm_up={self.warm_up} trading days, got {len(self.calendar)}"
            )
        order = sorted(range(len(self.tickers)), key=lambda k: self.tickers[k])
        prices = np.ascontiguousarray(prices[order])
        prices.flags.writeable = False
        object.__setattr__(self, "tickers", tuple(self.tickers[k] for k in order))
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dropped", tuple(sorted(self.dropped)))

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    @property
    def n_days(self) -> int:
        return len(self.calendar)

    @property
    def evaluation_days(self) -> int:
        return self.n_days - self.warm_up

    def index(self, ticker: str) -> int:
        return self.tickers.index(ticker)

    def series(self, ticker: str) -> PriceSeries:
        return PriceSeries(ticker, self.prices[self.index(ticker)])

    def scaled(self, ticker: str, factor: float) -> PriceUniverse:
        """Copy with one ticker's prices multiplied by ``factor``."""
        prices = np.array(self.prices)
        prices[self.index(ticker)] *= factor
        return PriceUniverse(self.calendar, self.tickers, prices, self.warm_up, self.dropped)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"warm_up={self.warm_up}\n".encode())
        h.update(",".join(d.isoformat() for d in self.calendar.days).encode())
        h.update(b"\n")
        h.update(",".join(self.tickers).encode())
        h.update(b"\n")
        h.update(np.ascontiguousarray(self.prices, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class GapPolicy:
    max_missing_fraction: float = 0.05


@dataclass(frozen=True)
class Block:
    size: int
    rho: float


@dataclass(frozen=True)
class SyntheticSpec:
    """Block-correlated geometric random walk parameters.

    ``reversion`` (default 0) pulls each ticker's cumulative log-return toward
    its block mean by that fraction per day; with 0 the increments are exactly the
    block-correlated walk.
    """

    n_tickers: int
    n_days: int
    blocks: tuple[Block, ...] = ()
    drift: float = 0.0
    step_vol: float = 0.01
    seed: int = 0
    reversion: float = 0.0
    warm_up: int | None = None
    start_date: dt.date = dt.date(2009, 1, 5)
    tau: int = DEFAULT_TAU

    def __post_init__(self):
        blocks = tuple(b if isinstance(b, Block) else Block(**b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if self.n_tickers < 1:
            raise MarketDataError("n_tickers must be positive")
        if sum(b.size for b in blocks) > self.n_tickers:
            raise MarketDataError("blocks hold more tickers than n_tickers")
        for b in blocks:
            if b.size < 1:
                raise MarketDataError("block size must be positive")
            if not -1.0 < b.rho < 1.0:
                raise MarketDataError(f"block correlation {b.rho} outside (-1, 1)")
        if not self.step_vol > 0:
            raise MarketDataError("step_vol must be positive")
        if not 0.0 <= self.reversion < 1.0:
            raise MarketDataError("reversion must lie in [0, 1)")
        if self.n_days < self.resolved_warm_up + 1:
            raise MarketDataError(
                f"n_days={self.n_days} leaves no evaluation day after warm-up {self.resolved_warm_up}"
            )

    @property
    def resolved_warm_up(self) -> int:
        return default_warm_up(self.tau) if self.warm_up is None else self.warm_up

    @classmethod
    def from_json(cls, path: str | Path) -> SyntheticSpec:
        with open(path) as f:
            raw = json.load(f)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> SyntheticSpec:
        required = {"n_tickers", "n_days", "blocks", "drift", "step_vol", "seed"}
        missing = required - raw.keys()
        if missing:
            raise MarketDataError(f"synthetic spec missing keys: {sorted(missing)}")
        kwargs = dict(raw)
        kwargs["blocks"] = tuple(Block(int(b["size"]), float(b["rho"])) for b in raw["blocks"])
        if "start_date" in kwargs:
            kwargs["start_date"] = dt.date.fromisoformat(kwargs["start_date"])
        return cls(**kwargs)


def _business_days(start: dt.date, n: int) -> tuple[dt.date, ...]:
    days = []
    d = start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return tuple(days)


def _block_mixing(size: int, rho: float) -> np.ndarray:
    corr = np.full((size, size), rho)
    np.fill_diagonal(corr, 1.0)
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        raise MarketDataError(
            f"infeasible correlation structure: block of {size} with rho={rho}"
        ) from None


def generate_synthetic(spec: SyntheticSpec) -> PriceUniverse:
    """Correlated geometric random walks, deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n, n_days = spec.n_tickers, spec.n_days
    width = len(str(n - 1))
    tickers = tuple(f"S{k:0{width}d}" for k in range(n))

    mixing = np.zeros((n, n))
    groups = []
    start = 0
    for b in spec.blocks:
        mixing[start:start + b.size, start:start + b.size] = _block_mixing(b.size, b.rho)
        groups.append(slice(start, start + b.size))
        start += b.size
    for k in range(start, n):
        mixing[k, k] = 1.0

    p0 = np.exp(rng.uniform(np.log(10.0), np.log(1000.0), size=n))
    shocks = rng.standard_normal((n_days - 1, n)) @ mixing.T
    steps = spec.drift + spec.step_vol * shocks

    # cumulative log-returns; reversion acts on these, not on price levels
    x = np.zeros((n_days, n))
    if spec.reversion == 0.0:
        x[1:] = np.cumsum(steps, axis=0)
    else:
        for d in range(1, n_days):
            prev = x[d - 1]
            pull = np.zeros(n)
            for g in groups:
                pull[g] = prev[g] - prev[g].mean()
            x[d] = prev + steps[d - 1] - spec.reversion * pull
    prices = np.exp(np.log(p0) + x).T
    return PriceUniverse(
        TradingCalendar(_business_days(spec.start_date, n_days)),
        tickers,
        prices,
        spec.resolved_warm_up,
    )


def _parse_rows(lines: Iterable[str]) -> dict[str, dict[dt.date, float]]:
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise MarketDataError("empty file", line=1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise MarketDataError(f"expected header {','.join(CSV_HEADER)}", line=1)
    data: dict[str, dict[dt.date, float]] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise MarketDataError(f"expected 3 fields, got {len(row)}", line=line)
        raw_date, ticker, raw_price = (c.strip() for c in row)
        try:
            day = dt.date.fromisoformat(raw_date)
        except ValueError:
            raise MarketDataError(f"bad date {raw_date!r}", line=line) from None
        if not ticker:
            raise MarketDataError("empty ticker", line=line)
        try:
            price = float(raw_price)
        except ValueError:
            raise MarketDataError(f"bad price {raw_price!r}", line=line) from None
        if not math.isfinite(price) or price <= 0:
            raise MarketDataError(f"non-positive price {raw_price!r} for {ticker}", line=line)
        by_day = data.setdefault(ticker, {})
        if day in by_day:
            raise MarketDataError(f"duplicate row for {ticker} on {raw_date}", line=line)
        by_day[day] = price
    return data


def align(
    data: dict[str, dict[dt.date, float]],
    warm_up: int,
    policy: GapPolicy = GapPolicy(),
) -> PriceUniverse:
    """Drop gappy tickers, trim to the common span and forward-fill the rest."""
    if not data:
        raise MarketDataError("no price rows")
    full = sorted(set().union(*data.values()))
    kept, dropped = [], []
    for ticker in sorted(data):
        missing = Fraction(len(full) - len(data[ticker]), len(full))
        (dropped if missing > Fraction(policy.max_missing_fraction) else kept).append(ticker)
    if not kept:
        raise MarketDataError("every ticker exceeds the missing-day limit")

    first = max(min(data[t]) for t in kept)
    last = min(max(data[t]) for t in kept)
    days = sorted(d for d in set().union(*(data[t] for t in kept)) if first <= d <= last)
    if len(days) < warm_up + 1:
        raise MarketDataError(
            f"only {len(days)} common trading days, need at least {warm_up + 1}"
        )

    prices = np.empty((len(kept), len(days)))
    for k, ticker in enumerate(kept):
        series = data[ticker]
        # first <= every ticker's first date, so a previous value always exists
        prev = series[max(d for d in series if d <= days[0])]
        for c, day in enumerate(days):
            prev = series.get(day, prev)
            prices[k, c] = prev
    return PriceUniverse(TradingCalendar(tuple(days)), tuple(kept), prices, warm_up, tuple(dropped))


def load_universe(
    path: str | Path,
    policy: GapPolicy = GapPolicy(),
    tau: int = DEFAULT_TAU,
    warm_up: int | None = None,
) -> PriceUniverse:
    """Read a long-format ``date,ticker,adj_close`` CSV into an aligned universe.

    Tickers missing more than ``policy.max_missing_fraction`` of the trading
    days are dropped and listed in ``universe.dropped``.
    """
    if warm_up is None:
        warm_up = default_warm_up(tau)
    with open(path, newline="") as f:
        data = _parse_rows(f)
    return align(data, warm_up, policy)


def universe_to_csv(universe: PriceUniverse) -> str:
    """Long-format CSV, rows ordered by date then ticker; byte-stable."""
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for c, day in enumerate(universe.calendar.days):
        iso = day.isoformat()
        for k, ticker in enumerate(universe.tickers):
            buf.write(f"{iso},{ticker},{float(universe.prices[k, c])!r}\n")
    return buf.getvalue()


def write_universe(universe: PriceUniverse, path: str | Path) -> None:
    Path(path).write_text(universe_to_csv(universe))


def market_return_series(universe: PriceUniverse, tau: int = DEFAULT_TAU) -> np.ndarray:
    """Equal-weight average of per-ticker daily log-returns of the rescaled price.

    Entry ``t`` is the return from evaluation day t to t+1, so the series has
    ``evaluation_days - 1`` values.
    """
    if universe.n_tickers == 0:
        raise MarketDataError("empty universe")
    if universe.evaluation_days < 2:
        raise MarketDataError("evaluation window shorter than 2 days")
    w = universe.warm_up
    if w < tau - 1:
        raise MarketDataError(f"warm_up={w} too short for tau={tau}")
    rows = np.stack([log_return_series(p, tau) for p in universe.prices])
    return rows[:, w:universe.n_days - 1].mean(axis=0)
