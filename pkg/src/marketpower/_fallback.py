"""Pure numpy implementations of the compiled kernels.

Same signatures and results as ``_kernels``; selected automatically when the
extension is not built. The Monte Carlo routine vectorises across iterations
instead of hours, which keeps it usable at desk scale.
"""

import numpy as np


def _solve_many(price, cvar, cstart, K, gmin, init_on, lo, hi, state):
    # cvar, cstart, state: (N, n); init_on: (N,) bool
    n_iter = cvar.shape[0]
    v_on = np.where(init_on, 0.0, -np.inf)
    v_off = np.where(init_on, -np.inf, 0.0)
    span = hi - lo
    on_from_on = np.empty((span, n_iter), dtype=bool)
    off_from_on = np.empty((span, n_iter), dtype=bool)
    for j, h in enumerate(range(lo, hi)):
        margin = price[h] - cvar[:, h]
        gain = np.where(margin >= 0.0, margin * K, margin * gmin)
        via_start = v_off - cstart[:, h]
        keep = v_on >= via_start
        on_from_on[j] = keep
        n_on = np.where(keep, v_on, via_start) + gain
        stay = v_on > v_off
        off_from_on[j] = stay
        v_off = np.where(stay, v_on, v_off)
        v_on = n_on
    s = v_on >= v_off
    best = np.where(s, v_on, v_off)
    for j in range(span - 1, -1, -1):
        state[:, lo + j] = s
        s = np.where(s, on_from_on[j], off_from_on[j])
    return best


def solve_dp(price, cvar, cstart, K, gmin, init_on):
    n = len(price)
    state = np.zeros((1, n), dtype=np.uint8)
    best = _solve_many(
        np.asarray(price, dtype=float),
        np.asarray(cvar, dtype=float)[None, :],
        np.asarray(cstart, dtype=float)[None, :],
        K, gmin, np.array([bool(init_on)]), 0, n, state,
    )
    return state[0], float(best[0])


def _chain_many(price, cvar, cstart, K, gmin, init_on, horizon, overlap):
    n_iter, n = cvar.shape
    state = np.zeros((n_iter, n), dtype=np.uint8)
    end = min(horizon, n)
    _solve_many(price, cvar, cstart, K, gmin,
                np.full(n_iter, bool(init_on)), 0, end, state)
    start = 0
    while end < n:
        start += horizon - overlap
        end = min(start + horizon, n)
        _solve_many(price, cvar, cstart, K, gmin, state[:, start] == 1,
                    start + 1, end, state)
    return state


def chain_dispatch(price, cvar, cstart, K, gmin, init_on, horizon, overlap):
    price = np.asarray(price, dtype=float)
    state = _chain_many(price, np.asarray(cvar, dtype=float)[None, :],
                        np.asarray(cstart, dtype=float)[None, :],
                        K, gmin, init_on, horizon, overlap)
    return state[0]


def mc_on_counts(price, fuel, carbon, K, gmin, efficiency, depreciation,
                 cold_fuel, cold_factor, mult, init_on, horizon, overlap,
                 batch=256):
    price = np.asarray(price, dtype=float)
    fuel = np.asarray(fuel, dtype=float)
    carbon = np.asarray(carbon, dtype=float)
    mult = np.asarray(mult, dtype=float)
    counts = np.zeros(len(price), dtype=np.int64)
    for b0 in range(0, mult.shape[0], batch):
        m = mult[b0:b0 + batch]
        th = m[:, 1:2] * fuel[None, :] + carbon[None, :]
        cvar = th / (efficiency * m[:, 0:1])
        cstart = K * (depreciation + cold_fuel * cold_factor * m[:, 2:3] * th)
        state = _chain_many(price, cvar, cstart, K, gmin, init_on, horizon, overlap)
        counts += state.sum(axis=0, dtype=np.int64)
    return counts


def partition_dp(P1, P2, cnt, kmax):
    P1 = np.asarray(P1, dtype=float)
    P2 = np.asarray(P2, dtype=float)
    cnt = np.asarray(cnt, dtype=float)
    M = P1.shape[0] - 1
    C = np.full((kmax + 1, M + 1), np.inf)
    T = np.zeros((kmax + 1, M + 1), dtype=np.int64)

    def cost(a, b):
        s1 = P1[b] - P1[a]
        s2 = P2[b] - P2[a]
        nn = (cnt[b] - cnt[a])[..., None]
        return np.maximum((s2 - s1 * s1 / nn).sum(axis=-1), 0.0)

    C[0, 1:] = np.maximum(
        ((P2[1:] - P2[0]) - (P1[1:] - P1[0]) ** 2 / (cnt[1:] - cnt[0])[:, None]).sum(axis=1),
        0.0,
    )
    for k in range(1, kmax + 1):
        for b in range(k + 1, M + 1):
            a = np.arange(k, b)
            c = C[k - 1, a] + cost(a, b)
            i = int(np.argmin(c))
            C[k, b] = c[i]
            T[k, b] = a[i]
    return C, T


def _line_sse(n, sx, sy, sxx, sxy, syy):
    vxx = sxx - sx * sx / n
    vyy = syy - sy * sy / n
    vxy = sxy - sx * sy / n
    flat = vxx <= 1e-12 * np.maximum(sxx, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(flat, vyy, vyy - vxy * vxy / np.where(flat, 1.0, vxx))
    return np.maximum(r, 0.0)


def segreg_dp(S, smax):
    S = np.asarray(S, dtype=float)
    M = S.shape[0] - 1
    C = np.full((smax + 1, M + 1), np.inf)
    T = np.zeros((smax + 1, M + 1), dtype=np.int64)
    D = S[1:] - S[0]
    C[1, 1:] = _line_sse(*D.T)
    for k in range(2, smax + 1):
        for b in range(k, M + 1):
            a = np.arange(k - 1, b)
            D = S[b] - S[a]
            c = C[k - 1, a] + _line_sse(*D.T)
            i = int(np.argmin(c))
            C[k, b] = c[i]
            T[k, b] = a[i]
    return C, T
