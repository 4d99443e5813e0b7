"""The three-threshold first-passage game played on one pair's spread.

A trade opens on the first day the spread reaches ``theta`` (without already
exceeding ``omega``) while both legs' volatilities sit inside the band and
their correlation exceeds ``rho_0``. It closes as a win when the spread falls
to ``epsilon`` or below, as a loss when it rises above ``omega``, and is left
unresolved if neither happens by ``tau_max``. A pair trades at most once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import indicators
from .market_data import PriceUniverse

BP = 10_000  # thresholds are held in basis points of a fraction


def to_bp(value: float) -> int:
    """Fraction -> integer basis points; rejects anything finer than 0.01 %."""
    bp = round(value * BP)
    if not math.isclose(bp, value * BP, abs_tol=1e-6):
        raise ValueError(f"threshold {value!r} is not a whole number of basis points")
    return bp


@dataclass(frozen=True, order=True)
class ThresholdSet:
    """Start, profit-take and loss-cut levels, stored exactly in basis points."""

    theta_bp: int
    epsilon_bp: int
    omega_bp: int

    def __post_init__(self):
        if not 0 <= self.epsilon_bp < self.theta_bp < self.omega_bp:
            raise ValueError(
                f"need 0 <= epsilon < theta < omega, got "
                f"epsilon={self.epsilon}, theta={self.theta}, omega={self.omega}"
            )

    @classmethod
    def of(cls, theta: float, epsilon: float, omega: float | None = None) -> ThresholdSet:
        t, e = to_bp(theta), to_bp(epsilon)
        if e >= t:
            raise ValueError(f"epsilon ({epsilon}) must be below theta ({theta})")
        o = 2 * t - e if omega is None else to_bp(omega)
        return cls(t, e, o)

    @property
    def theta(self) -> float:
        return self.theta_bp / BP

    @property
    def epsilon(self) -> float:
        return self.epsilon_bp / BP

    @property
    def omega(self) -> float:
        return self.omega_bp / BP

    @property
    def alpha(self) -> float:
        return alpha(self)


def omega_from(theta: float, epsilon: float) -> float:
    """Loss-cut level of the neutral strategy, 2*theta - epsilon."""
    return ThresholdSet.of(theta, epsilon).omega


def alpha(thresholds: ThresholdSet) -> float:
    """Ratio of the marginal loss (omega - theta) to the minimum profit (theta - epsilon)."""
    t = thresholds
    return float(Fraction(t.omega_bp - t.theta_bp, t.theta_bp - t.epsilon_bp))


@dataclass(frozen=True)
class FilterParams:
    rho_0: float = 0.6
    sigma_min: float = 0.05
    sigma_max: float = 0.2
    tau: int = 250
    tau_max: int = 250
    volatility_mode: str = "std"

    def __post_init__(self):
        if not -1.0 < self.rho_0 < 1.0:
            raise ValueError("rho_0 must lie in (-1, 1)")
        if not 0.0 <= self.sigma_min < self.sigma_max:
            raise ValueError("need 0 <= sigma_min < sigma_max")
        if self.tau < 2:
            raise ValueError("tau must be at least 2")
        if self.tau_max < 1:
            raise ValueError("tau_max must be at least 1")
        if self.volatility_mode not in indicators.VOLATILITY_MODES:
            raise ValueError(f"unknown volatility mode {self.volatility_mode!r}")


class Kind(str, enum.Enum):
    WIN = "win"
    LOSE = "lose"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True, order=True)
class TradeOutcome:
    pair: tuple[str, str]
    t_start: int
    t_decision: int | None
    kind: Kind
    d_start: float
    d_decision: float | None
    profit: float | None
    rho: float
    sigma_a: float
    sigma_b: float

    @property
    def counted(self) -> bool:
        return self.kind is not Kind.UNRESOLVED

    @property
    def passage_time(self) -> int | None:
        return None if self.t_decision is None else self.t_decision - self.t_start

    @property
    def mean_sigma(self) -> float:
        return (self.sigma_a + self.sigma_b) / 2


def canonical(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class PairPath:
    """Everything the game reads for one pair, on evaluation days 0..tau_max.

    ``rho`` and ``sigma_*`` are NaN on days where they are undefined.
    """

    pair: tuple[str, str]
    spread: np.ndarray
    rho: np.ndarray
    sigma_a: np.ndarray
    sigma_b: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.spread) - 1


def check_history(universe: PriceUniverse, filters: FilterParams) -> None:
    if universe.warm_up < filters.tau - 1:
        raise indicators.InsufficientHistory(
            f"warm_up={universe.warm_up} days cannot define rates for tau={filters.tau}"
        )
    if universe.evaluation_days < filters.tau_max + 1:
        raise indicators.InsufficientHistory(
            f"{universe.evaluation_days} evaluation days, need tau_max+1={filters.tau_max + 1}"
        )


def pair_path(universe: PriceUniverse, a: str, b: str, filters: FilterParams) -> PairPath:
    """Build the spread, correlation and volatility paths with the rolling indicators."""
    check_history(universe, filters)
    a, b = canonical(a, b)
    w, h, tau = universe.warm_up, filters.tau_max, filters.tau
    days = slice(w, w + h + 1)
    pa, pb = universe.prices[universe.index(a)], universe.prices[universe.index(b)]
    ga, gb = indicators.rate_series(pa, tau), indicators.rate_series(pb, tau)
    rho = indicators.rolling_pearson(
        indicators.log_return_series(pa, tau), indicators.log_return_series(pb, tau), tau
    )
    mode = filters.volatility_mode
    return PairPath(
        (a, b),
        np.abs(ga[days] - gb[days]),
        rho[days],
        indicators.rolling_volatility(ga, tau, mode)[days],
        indicators.rolling_volatility(gb, tau, mode)[days],
    )


def _filters_pass(path: PairPath, t: int, filters: FilterParams) -> bool:
    lo, hi = filters.sigma_min, filters.sigma_max
    # NaN compares false, so undefined statistics never pass
    return bool(
        lo < path.sigma_a[t] < hi and lo < path.sigma_b[t] < hi and path.rho[t] > filters.rho_0
    )


def start_scan(
    path: PairPath, filters: FilterParams, thresholds: ThresholdSet, start: int = 0
) -> int | None:
    """First day >= start on which the filters pass and theta <= d <= omega."""
    theta, omega = thresholds.theta, thresholds.omega
    for t in range(start, min(filters.tau_max, path.horizon) + 1):
        d = path.spread[t]
        if theta <= d <= omega and _filters_pass(path, t, filters):
            return t
    return None


def resolve_trade(
    path: PairPath, t_start: int, thresholds: ThresholdSet, tau_max: int
) -> TradeOutcome:
    d0 = float(path.spread[t_start])
    kind, t_hat = Kind.UNRESOLVED, None
    for t in range(t_start + 1, min(tau_max, path.horizon) + 1):
        d = path.spread[t]
        if d <= thresholds.epsilon:
            kind, t_hat = Kind.WIN, t
            break
        if d > thresholds.omega:
            kind, t_hat = Kind.LOSE, t
            break
    d1 = None if t_hat is None else float(path.spread[t_hat])
    return TradeOutcome(
        pair=path.pair,
        t_start=t_start,
        t_decision=t_hat,
        kind=kind,
        d_start=d0,
        d_decision=d1,
        profit=None if d1 is None else d0 - d1,
        rho=float(path.rho[t_start]),
        sigma_a=float(path.sigma_a[t_start]),
        sigma_b=float(path.sigma_b[t_start]),
    )


def play_pair(
    path: PairPath, filters: FilterParams, thresholds: ThresholdSet
) -> TradeOutcome | None:
    """At most one trade per pair: scan for a start, then follow it to a decision."""
    t0 = start_scan(path, filters, thresholds)
    if t0 is None:
        return None
    return resolve_trade(path, t0, thresholds, filters.tau_max)
