"""Compiled inner loops: rolling window sums and the per-pair game scan.

All functions are ``nogil`` so the sweep can shard pairs over threads.
"""

import numpy as np
from numba import njit

# full recomputation cadence for running sums; bounds accumulated rounding drift
REFRESH = 1000

NONE, WIN, LOSE, UNRESOLVED = 0, 1, 2, 3

# windows whose running variance is below this fraction of the series' largest
# window sum of squares are recomputed directly: running-sum drift scales with
# the largest values seen, not with the current window
DIRECT_BELOW = 1e-6


@njit(cache=True, nogil=True)
def window_sums(x, w, refresh):
    """out[k] = x[k] + ... + x[k+w-1] for k in 0..len(x)-w, via running sums."""
    n = x.shape[0] - w + 1
    out = np.empty(max(n, 0))
    if n <= 0:
        return out
    s = 0.0
    for k in range(w):
        s += x[k]
    out[0] = s
    since = 0
    for k in range(1, n):
        since += 1
        if since >= refresh:
            s = 0.0
            for m in range(k, k + w):
                s += x[m]
            since = 0
        else:
            s += x[k + w - 1] - x[k - 1]
        out[k] = s
    return out


@njit(cache=True, nogil=True)
def _direct_rho(xi, xj, m, w):
    a = 0.0
    b = 0.0
    for q in range(m, m + w):
        a += xi[q]
        b += xj[q]
    a /= w
    b /= w
    sij = 0.0
    sii = 0.0
    sjj = 0.0
    for q in range(m, m + w):
        da = xi[q] - a
        db = xj[q] - b
        sij += da * db
        sii += da * da
        sjj += db * db
    return sij / np.sqrt(sii * sjj)


@njit(cache=True, nogil=True)
def pair_rho(xi, xj, sxi, sxj, vi, vj, di, dj, w, refresh, rho):
    """Rolling Pearson of two centered return rows over windows 0..len(rho)-1.

    Window m covers return columns m .. m+w-1. A zero variance (constant
    window) gives NaN; windows flagged in ``di``/``dj`` are computed directly.
    Returns the number of NaN windows.
    """
    n_m = rho.shape[0]
    if n_m <= 0:
        return 0
    s = 0.0
    for m in range(w):
        s += xi[m] * xj[m]
    since = 0
    undefined = 0
    for m in range(n_m):
        if m > 0:
            since += 1
            if since >= refresh:
                s = 0.0
                for q in range(m, m + w):
                    s += xi[q] * xj[q]
                since = 0
            else:
                s += xi[m + w - 1] * xj[m + w - 1] - xi[m - 1] * xj[m - 1]
        if vi[m] == 0.0 or vj[m] == 0.0:
            rho[m] = np.nan
            undefined += 1
            continue
        if di[m] or dj[m]:
            r = _direct_rho(xi, xj, m, w)
        else:
            r = (s - sxi[m] * sxj[m] / w) / np.sqrt(vi[m] * vj[m])
        if r > 1.0:
            r = 1.0
        elif r < -1.0:
            r = -1.0
        rho[m] = r
    return undefined


@njit(cache=True, nogil=True)
def _day_rho(xc, sx, vx, dx, i, j, w, off, refresh, rho_m, rho):
    """Pair correlation on evaluation days; day t reads window t + off."""
    pair_rho(xc[i], xc[j], sx[i], sx[j], vx[i], vx[j], dx[i], dx[j], w, refresh, rho_m)
    for t in range(rho.shape[0]):
        m = t + off
        rho[t] = rho_m[m] if m >= 0 else np.nan


@njit(cache=True, nogil=True)
def screen_rows(
    i0, i1, xc, sx, vx, dx, sig_ok, g, rho0, theta_min, omega_max, w, off, refresh,
    out_i, out_j,
):
    """Flag pairs (i, j), i in [i0, i1), j > i, that can open a trade in some cell.

    A pair qualifies if on some day both volatilities are in band, rho > rho0
    and the spread lies in [theta_min, omega_max]. Returns (flagged count,
    in-band pair-days with undefined rho among the pairs examined).
    """
    n = xc.shape[0]
    n_t = g.shape[1]
    rho_m = np.empty(max(n_t + off, 0))
    rho = np.empty(n_t)
    k = 0
    undefined = 0
    for i in range(i0, i1):
        for j in range(i + 1, n):
            candidate = False
            for t in range(n_t):
                if sig_ok[i, t] and sig_ok[j, t]:
                    d = abs(g[i, t] - g[j, t])
                    if d >= theta_min and d <= omega_max:
                        candidate = True
                        break
            if not candidate:
                continue
            _day_rho(xc, sx, vx, dx, i, j, w, off, refresh, rho_m, rho)
            hit = False
            for t in range(n_t):
                if sig_ok[i, t] and sig_ok[j, t]:
                    if rho[t] != rho[t]:
                        undefined += 1
                        continue
                    d = abs(g[i, t] - g[j, t])
                    if rho[t] > rho0 and d >= theta_min and d <= omega_max:
                        hit = True
            if hit:
                out_i[k] = i
                out_j[k] = j
                k += 1
    return k, undefined


@njit(cache=True, nogil=True)
def scan_cell(d, eligible, theta, epsilon, omega, horizon):
    """One game on a spread path. Returns (kind, t_start, t_decision)."""
    t_start = -1
    for t in range(0, horizon + 1):
        if eligible[t] and d[t] >= theta and d[t] <= omega:
            t_start = t
            break
    if t_start < 0:
        return NONE, -1, -1
    for t in range(t_start + 1, horizon + 1):
        if d[t] <= epsilon:
            return WIN, t_start, t
        if d[t] > omega:
            return LOSE, t_start, t
    return UNRESOLVED, t_start, -1


@njit(cache=True, nogil=True)
def play_pairs(
    pi, pj, xc, sx, vx, dx, sig_ok, g, rho0, w, off, refresh,
    thetas, epsilons, omegas, horizon,
    kind, t_start, t_dec, rho_out,
):
    """Play every cell for each listed pair, writing into the (pair, cell) outputs."""
    n_t = g.shape[1]
    rho_m = np.empty(max(n_t + off, 0))
    d = np.empty(n_t)
    eligible = np.zeros(n_t, dtype=np.bool_)
    for p in range(pi.shape[0]):
        i = pi[p]
        j = pj[p]
        rho = rho_out[p]
        _day_rho(xc, sx, vx, dx, i, j, w, off, refresh, rho_m, rho)
        for t in range(n_t):
            d[t] = abs(g[i, t] - g[j, t])
            eligible[t] = sig_ok[i, t] and sig_ok[j, t] and rho[t] > rho0
        for c in range(thetas.shape[0]):
            k, ts, td = scan_cell(d, eligible, thetas[c], epsilons[c], omegas[c], horizon)
            kind[p, c] = k
            t_start[p, c] = ts
            t_dec[p, c] = td
