# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror ``_fallback`` one to one."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef double _solve(const double[:] price, const double[:] cvar,
                   const double[:] cstart, double K, double gmin,
                   bint init_on, Py_ssize_t lo, Py_ssize_t hi,
                   unsigned char[:] state, unsigned char* from_on) noexcept nogil:
    # Two-state DP over [lo, hi). from_on[2*j] : on-state at j came from on,
    # from_on[2*j+1] : off-state at j came from on.
    cdef double v_on, v_off, n_on, n_off, margin, gain, via_start
    cdef Py_ssize_t h, j
    if init_on:
        v_on = 0.0
        v_off = -INFINITY
    else:
        v_on = -INFINITY
        v_off = 0.0
    for h in range(lo, hi):
        j = h - lo
        margin = price[h] - cvar[h]
        if margin >= 0.0:
            gain = margin * K
        else:
            gain = margin * gmin
        via_start = v_off - cstart[h]
        if v_on >= via_start:
            n_on = v_on + gain
            from_on[2 * j] = 1
        else:
            n_on = via_start + gain
            from_on[2 * j] = 0
        if v_on > v_off:
            n_off = v_on
            from_on[2 * j + 1] = 1
        else:
            n_off = v_off
            from_on[2 * j + 1] = 0
        v_on = n_on
        v_off = n_off
    cdef unsigned char s
    cdef double best
    if v_on >= v_off:
        s = 1
        best = v_on
    else:
        s = 0
        best = v_off
    for h in range(hi - 1, lo - 1, -1):
        j = h - lo
        state[h] = s
        if s:
            s = from_on[2 * j]
        else:
            s = from_on[2 * j + 1]
    return best


def solve_dp(const double[:] price, const double[:] cvar, const double[:] cstart,
             double K, double gmin, bint init_on):
    cdef Py_ssize_t n = price.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[:] state = out
    cdef unsigned char* buf = <unsigned char*> malloc(2 * n + 2)
    cdef double obj
    try:
        with nogil:
            obj = _solve(price, cvar, cstart, K, gmin, init_on, 0, n, state, buf)
    finally:
        free(buf)
    return out, obj


cdef void _chain(const double[:] price, const double[:] cvar,
                 const double[:] cstart, double K, double gmin, bint init_on,
                 Py_ssize_t horizon, Py_ssize_t overlap,
                 unsigned char[:] state, unsigned char* buf) noexcept nogil:
    cdef Py_ssize_t n = price.shape[0]
    cdef Py_ssize_t start = 0, end
    cdef Py_ssize_t step = horizon - overlap
    end = start + horizon
    if end > n:
        end = n
    _solve(price, cvar, cstart, K, gmin, init_on, 0, end, state, buf)
    while end < n:
        start += step
        end = start + horizon
        if end > n:
            end = n
        # first hour of the previous horizon's last day is kept as is
        _solve(price, cvar, cstart, K, gmin, state[start] == 1,
               start + 1, end, state, buf)


def chain_dispatch(const double[:] price, const double[:] cvar, const double[:] cstart,
                   double K, double gmin, bint init_on, Py_ssize_t horizon,
                   Py_ssize_t overlap):
    cdef Py_ssize_t n = price.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[:] state = out
    cdef unsigned char* buf = <unsigned char*> malloc(2 * horizon + 2)
    try:
        with nogil:
            _chain(price, cvar, cstart, K, gmin, init_on, horizon, overlap, state, buf)
    finally:
        free(buf)
    return out


def mc_on_counts(const double[:] price, const double[:] fuel, const double[:] carbon,
                 double K, double gmin, double efficiency, double depreciation,
                 double cold_fuel, double cold_factor, const double[:, :] mult,
                 bint init_on, Py_ssize_t horizon, Py_ssize_t overlap):
    cdef Py_ssize_t n = price.shape[0]
    cdef Py_ssize_t n_iter = mult.shape[0]
    counts_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[:] counts = counts_arr
    cvar_arr = np.empty(n, dtype=np.float64)
    cstart_arr = np.empty(n, dtype=np.float64)
    state_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:] cvar = cvar_arr
    cdef double[:] cstart = cstart_arr
    cdef unsigned char[:] state = state_arr
    cdef unsigned char* buf = <unsigned char*> malloc(2 * horizon + 2)
    cdef Py_ssize_t it, h
    cdef double m_sig, m_fuel, m_r, eff, th
    try:
        with nogil:
            for it in range(n_iter):
                m_sig = mult[it, 0]
                m_fuel = mult[it, 1]
                m_r = mult[it, 2]
                eff = efficiency * m_sig
                for h in range(n):
                    th = m_fuel * fuel[h] + carbon[h]
                    cvar[h] = th / eff
                    cstart[h] = K * (depreciation + cold_fuel * cold_factor * m_r * th)
                _chain(price, cvar, cstart, K, gmin, init_on, horizon, overlap, state, buf)
                for h in range(n):
                    counts[h] += state[h]
    finally:
        free(buf)
    return counts_arr


def partition_dp(const double[:, :] P1, const double[:, :] P2, const double[:] cnt,
                 Py_ssize_t kmax):
    """Contiguous least-squares partition over candidate boundaries."""
    cdef Py_ssize_t M = P1.shape[0] - 1
    cdef Py_ssize_t d = P1.shape[1]
    cost_arr = np.full((kmax + 1, M + 1), np.inf)
    back_arr = np.zeros((kmax + 1, M + 1), dtype=np.int64)
    cdef double[:, :] C = cost_arr
    cdef cnp.int64_t[:, :] T = back_arr
    cdef Py_ssize_t k, a, b, q, best_a
    cdef double c, s1, s2, nn, best, tot
    with nogil:
        for b in range(1, M + 1):
            nn = cnt[b] - cnt[0]
            tot = 0.0
            for q in range(d):
                s1 = P1[b, q] - P1[0, q]
                s2 = P2[b, q] - P2[0, q]
                tot = tot + s2 - s1 * s1 / nn
            C[0, b] = tot if tot > 0.0 else 0.0
        for k in range(1, kmax + 1):
            for b in range(k + 1, M + 1):
                best = INFINITY
                best_a = k
                for a in range(k, b):
                    if C[k - 1, a] == INFINITY:
                        continue
                    nn = cnt[b] - cnt[a]
                    tot = 0.0
                    for q in range(d):
                        s1 = P1[b, q] - P1[a, q]
                        s2 = P2[b, q] - P2[a, q]
                        tot = tot + s2 - s1 * s1 / nn
                    if tot < 0.0:
                        tot = 0.0
                    c = C[k - 1, a] + tot
                    if c < best:
                        best = c
                        best_a = a
                C[k, b] = best
                T[k, b] = best_a
    return cost_arr, back_arr


cdef inline double _line_sse(double n, double sx, double sy, double sxx,
                             double sxy, double syy) noexcept nogil:
    cdef double vxx = sxx - sx * sx / n
    cdef double vyy = syy - sy * sy / n
    cdef double vxy = sxy - sx * sy / n
    cdef double r
    if vxx <= 1e-12 * (sxx if sxx > 1.0 else 1.0):
        r = vyy
    else:
        r = vyy - vxy * vxy / vxx
    return r if r > 0.0 else 0.0


def segreg_dp(const double[:, :] S, Py_ssize_t smax):
    """Discontinuous segmented line fit; S rows are prefix sums
    (n, x, y, xx, xy, yy) at candidate split positions."""
    cdef Py_ssize_t M = S.shape[0] - 1
    cost_arr = np.full((smax + 1, M + 1), np.inf)
    back_arr = np.zeros((smax + 1, M + 1), dtype=np.int64)
    cdef double[:, :] C = cost_arr
    cdef cnp.int64_t[:, :] T = back_arr
    cdef Py_ssize_t k, a, b, best_a
    cdef double c, best
    with nogil:
        for b in range(1, M + 1):
            C[1, b] = _line_sse(S[b, 0] - S[0, 0], S[b, 1] - S[0, 1], S[b, 2] - S[0, 2],
                                S[b, 3] - S[0, 3], S[b, 4] - S[0, 4], S[b, 5] - S[0, 5])
        for k in range(2, smax + 1):
            for b in range(k, M + 1):
                best = INFINITY
                best_a = k - 1
                for a in range(k - 1, b):
                    if C[k - 1, a] == INFINITY:
                        continue
                    c = C[k - 1, a] + _line_sse(
                        S[b, 0] - S[a, 0], S[b, 1] - S[a, 1], S[b, 2] - S[a, 2],
                        S[b, 3] - S[a, 3], S[b, 4] - S[a, 4], S[b, 5] - S[a, 5])
                    if c < best:
                        best = c
                        best_a = a
                C[k, b] = best
                T[k, b] = best_a
    return cost_arr, back_arr
