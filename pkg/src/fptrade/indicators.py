"""Per-stock and per-pair rolling statistics.

Index conventions: every function takes raw day indices into a price or
statistic array. A rate is defined from index ``tau - 1`` on; a daily
log-return at ``l`` needs rates at ``l`` and ``l + 1``.

Pointwise functions (``rate``, ``pearson``, ``volatility``...) recompute
their window directly. The ``rolling_*`` variants produce whole series with
running sums and are what the sweep uses.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels

VOLATILITY_MODES = ("std", "paper-literal")
CLAMP_TOLERANCE = 1e-9


class InsufficientHistory(ValueError):
    pass


class UndefinedStatistic(ValueError):
    """Zero variance in a window: correlation or beta does not exist."""


def _need(cond: bool, what: str) -> None:
    if not cond:
        raise InsufficientHistory(what)


def rate(prices, t: int, tau: int) -> float:
    """p(t) / p(t - tau + 1) - 1."""
    _need(0 <= t - tau + 1 and t < len(prices), f"rate needs prices at {t - tau + 1}..{t}")
    return prices[t] / prices[t - tau + 1] - 1.0


def rate_series(prices, tau: int) -> np.ndarray:
    prices = np.asarray(prices, dtype=np.float64)
    out = np.full(prices.shape, np.nan)
    if len(prices) >= tau:
        out[tau - 1:] = prices[tau - 1:] / prices[:len(prices) - tau + 1] - 1.0
    return out


def log_return(prices, t: int, tau: int) -> float:
    """log(rate(t+1) + 1) - log(rate(t) + 1), the one-day log-return of the rescaled price."""
    _need(t + 1 < len(prices), f"log-return at {t} needs a price at {t + 1}")
    return math.log(rate(prices, t + 1, tau) + 1.0) - math.log(rate(prices, t, tau) + 1.0)


def log_return_series(prices, tau: int) -> np.ndarray:
    """Entry l holds ``log_return(prices, l, tau)``; NaN where undefined."""
    g = rate_series(prices, tau)
    lg = np.log(g + 1.0)
    out = np.full(g.shape, np.nan)
    out[:-1] = lg[1:] - lg[:-1]
    return out


def moving_average(series, t: int, tau: int) -> float:
    _need(0 <= t - tau + 1 and t < len(series), f"moving average needs {tau} values ending at {t}")
    window = np.asarray(series[t - tau + 1:t + 1], dtype=np.float64)
    return math.fsum(window) / tau


def pearson(a, b, t: int, tau: int) -> float:
    """Pearson estimator over the tau-1 daily log-returns at t-tau+1 .. t-1.

    ``a`` and ``b`` are log-return series (see ``log_return_series``).
    Raises ``UndefinedStatistic`` if either window is constant.
    """
    lo = t - tau + 1
    _need(lo >= 0 and t <= len(a) and t <= len(b), f"pearson needs returns at {lo}..{t - 1}")
    x = np.asarray(a[lo:t], dtype=np.float64)
    y = np.asarray(b[lo:t], dtype=np.float64)
    _need(bool(np.all(np.isfinite(x)) and np.all(np.isfinite(y))), "log-returns undefined in window")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedStatistic(f"constant return window ending at {t - 1}")
    x = x - x.mean()
    y = y - y.mean()
    r = float(np.dot(x, y) / math.sqrt(float(np.dot(x, x)) * float(np.dot(y, y))))
    if abs(r) > 1.0 + CLAMP_TOLERANCE:
        raise ArithmeticError(f"correlation {r} outside [-1, 1] beyond rounding")
    return min(1.0, max(-1.0, r))


def volatility(rates, t: int, tau: int, mode: str = "std") -> float:
    """Spread of the rates over the window t-tau+1 .. t.

    ``std`` divides the sum of squares by tau; ``paper-literal`` does not,
    so it is ``std * sqrt(tau)``.
    """
    if mode not in VOLATILITY_MODES:
        raise ValueError(f"unknown volatility mode {mode!r}")
    lo = t - tau + 1
    _need(lo >= 0 and t < len(rates), f"volatility needs rates at {lo}..{t}")
    window = np.asarray(rates[lo:t + 1], dtype=np.float64)
    _need(bool(np.all(np.isfinite(window))), "rates undefined in window")
    if np.all(window == window[0]):
        return 0.0
    ss = float(np.sum((window - window.mean()) ** 2))
    return math.sqrt(ss / tau) if mode == "std" else math.sqrt(ss)


def spread(gi: float, gj: float) -> float:
    return abs(gi - gj)


def market_beta(stock, market) -> float:
    """Least-squares slope of stock returns on market returns over the given window."""
    y = np.asarray(stock, dtype=np.float64)
    x = np.asarray(market, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("stock and market windows must be aligned and hold 2+ values")
    xc = x - x.mean()
    var = float(np.dot(xc, xc))
    if var == 0.0:
        raise UndefinedStatistic("zero market variance")
    return float(np.dot(xc, y - y.mean())) / var


def hedge_ratio(beta_i: float, beta_j: float) -> float:
    """Volume of j shorted per unit of i so the pair return is market neutral."""
    if beta_j == 0:
        raise ZeroDivisionError("beta_j is zero")
    return beta_i / beta_j


# rolling series --------------------------------------------------------------


def _finite_span(x: np.ndarray) -> tuple[int, int]:
    """[lo, hi) of the defined values; NaN is allowed only before and after."""
    idx = np.flatnonzero(np.isfinite(x))
    if idx.size == 0:
        return 0, 0
    lo, hi = int(idx[0]), int(idx[-1]) + 1
    if idx.size != hi - lo:
        raise ValueError("series has gaps inside its defined span")
    return lo, hi


def rolling_mean(series, tau: int) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    lo, hi = _finite_span(x)
    body = x[lo:hi]
    if len(body) >= tau:
        shift = body.mean()
        out[lo + tau - 1:hi] = _kernels.window_sums(body - shift, tau, _kernels.REFRESH) / tau + shift
    return out


def constant_windows(x: np.ndarray, w: int) -> np.ndarray:
    """flags[k] is True when x[k] .. x[k+w-1] are all exactly equal."""
    n = len(x)
    if n < w:
        return np.zeros(0, dtype=bool)
    idx = np.arange(n)
    change = np.ones(n, dtype=bool)
    change[1:] = x[1:] != x[:-1]
    run = idx - np.maximum.accumulate(np.where(change, idx, 0)) + 1
    return run[w - 1:] >= w


def window_moments(x: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(window sums, centered sums of squares, recomputed-directly flags).

    Constant windows get exactly zero. Windows whose running variance is tiny
    next to the largest window are recomputed directly, and flagged so the
    correlation kernel does the same for the cross term.
    """
    x = np.asarray(x, dtype=np.float64)
    s1 = _kernels.window_sums(x, w, _kernels.REFRESH)
    s2 = _kernels.window_sums(x * x, w, _kernels.REFRESH)
    ss = s2 - s1 * s1 / w
    flat = constant_windows(x, w)
    direct = np.zeros(len(ss), dtype=bool)
    if len(ss):
        direct = ~flat & (ss <= _kernels.DIRECT_BELOW * s2.max())
    for m in np.flatnonzero(direct):
        win = x[m:m + w]
        ss[m] = float(np.sum((win - win.mean()) ** 2))
    ss[flat] = 0.0
    return s1, ss, direct


def rolling_volatility(rates, tau: int, mode: str = "std") -> np.ndarray:
    """``volatility(rates, t, tau, mode)`` for every t, NaN where undefined."""
    if mode not in VOLATILITY_MODES:
        raise ValueError(f"unknown volatility mode {mode!r}")
    x = np.asarray(rates, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    lo, hi = _finite_span(x)
    body = x[lo:hi]
    if len(body) < tau:
        return out
    _, ss, _ = window_moments(body - body.mean(), tau)
    out[lo + tau - 1:hi] = np.sqrt(ss / tau) if mode == "std" else np.sqrt(ss)
    return out


def centered_returns(x: np.ndarray) -> tuple[int, np.ndarray]:
    """(start index, defined span of a log-return series shifted to zero mean)."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = _finite_span(x)
    body = x[lo:hi]
    return lo, body - body.mean() if len(body) else body


def rolling_pearson(a, b, tau: int) -> np.ndarray:
    """``pearson(a, b, t, tau)`` for every t; NaN where undefined or degenerate."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("series must be aligned")
    out = np.full(len(x), np.nan)
    (xl, xh), (yl, yh) = _finite_span(x), _finite_span(y)
    lo, hi = max(xl, yl), min(xh, yh)
    w = tau - 1
    if hi - lo < w:
        return out
    xc = x[lo:hi] - x[lo:hi].mean()
    yc = y[lo:hi] - y[lo:hi].mean()
    sx, vx, dx = window_moments(xc, w)
    sy, vy, dy = window_moments(yc, w)
    rho = np.empty(len(sx))
    _kernels.pair_rho(xc, yc, sx, sy, vx, vy, dx, dy, w, _kernels.REFRESH, rho)
    # the window over returns lo+m .. lo+m+w-1 belongs to day lo+m+w
    days = np.arange(len(rho)) + lo + w
    keep = days < len(x)
    out[days[keep]] = rho[keep]
    return out
