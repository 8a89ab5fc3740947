"""Slope of the aggregate supply curve per hour.

Two stages. Carbon-adjusted gas and coal prices are cut into contiguous
regimes by an exact least-squares partition DP. Within each regime, spot price
is regressed on residual load with a continuous, non-decreasing piecewise
linear function whose knots come from a segmented-regression DP and whose
segment count is chosen by BIC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.optimize import lsq_linear, minimize_scalar

from . import kernels
from .errors import DomainError, InfeasibleError, ValidationError
from .fuels import FuelParams, carbon_adjust
from .market_data import format_float, format_hours, parse_float, parse_hours, read_table, residual_load, write_rows

REGIME_COLUMNS = ("regime_id", "start_timestamp", "end_timestamp", "n_hours",
                  "gas_centroid", "coal_centroid", "explained_variance")
FIT_COLUMNS = ("regime_id", "segment", "knot_lo", "knot_hi", "intercept", "slope", "sse", "n_obs")


# -- regime segmentation ------------------------------------------------------------

@dataclass(frozen=True)
class RegimeSegmentation:
    n: int
    breakpoints: tuple
    centroids: np.ndarray
    explained_variance: float
    # minimum within-cluster SSE for k = 0, 1, ... breakpoints
    sse_path: np.ndarray = field(repr=False)

    @property
    def bounds(self):
        edges = (0,) + tuple(self.breakpoints) + (self.n,)
        return list(zip(edges[:-1], edges[1:]))

    def labels(self) -> np.ndarray:
        lab = np.zeros(self.n, dtype=np.int64)
        for r, (a, b) in enumerate(self.bounds):
            lab[a:b] = r
        return lab


def candidate_boundaries(n, jump):
    """Segment edges on a ``jump``-hour grid; every segment spans at least ``jump`` hours."""
    jump = max(1, int(jump))
    pos = np.arange(0, max(n - jump, 0) + 1, jump, dtype=np.int64)
    return np.append(pos[pos < n], n)


def partition_path(series, kmax, jump=1):
    """SSE of the best contiguous partition for k = 0..kmax and the DP backpointers."""
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    pos = candidate_boundaries(n, jump)
    M = len(pos) - 1
    if kmax > M - 1:
        raise InfeasibleError(f"{n} observations (jump {jump}) allow at most {M - 1} breakpoints, {kmax} requested")
    Xc = X - X.mean(axis=0)
    c1 = np.vstack([np.zeros(X.shape[1]), np.cumsum(Xc, axis=0)])
    c2 = np.vstack([np.zeros(X.shape[1]), np.cumsum(Xc * Xc, axis=0)])
    C, T = kernels.partition_dp(np.ascontiguousarray(c1[pos]), np.ascontiguousarray(c2[pos]),
                                pos.astype(float), int(kmax))
    return C[:, M].copy(), T, pos


def _backtrack(T, pos, k):
    b = len(pos) - 1
    out = []
    for kk in range(k, 0, -1):
        b = int(T[kk, b])
        out.append(int(pos[b]))
    return tuple(reversed(out))


def segment_regimes(series, max_breakpoints=11, variance_target=0.95, jump=1) -> RegimeSegmentation:
    """Fewest breakpoints whose partition explains ``variance_target`` of the variance."""
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise InfeasibleError("need at least two observations")
    if not 0 < variance_target <= 1:
        raise DomainError("variance_target must lie in (0, 1]")
    # short samples cannot host the full breakpoint budget
    kmax = min(int(max_breakpoints), len(candidate_boundaries(n, jump)) - 2)
    sse, T, pos = partition_path(X, kmax, jump)
    total = sse[0]
    scale = float(np.sum((X - X.mean(axis=0)) ** 2)) if n else 0.0
    if total <= 1e-12 * max(1.0, float(np.sum(X * X))) or scale == 0.0:
        ev = np.ones_like(sse)
    else:
        ev = np.clip(1.0 - sse / total, 0.0, 1.0)
        ev = np.maximum.accumulate(ev)
    hit = np.flatnonzero(ev >= variance_target)
    k = int(hit[0]) if hit.size else kmax
    bps = _backtrack(T, pos, k)
    edges = (0,) + bps + (n,)
    cents = np.array([X[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    return RegimeSegmentation(n, bps, cents, float(ev[k]), sse)


# -- piecewise supply fit -------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseSupplyFit:
    knots: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    sse: float
    n_obs: int

    @property
    def n_segments(self):
        return len(self.slopes)

    def segment_of(self, l):
        return np.searchsorted(self.knots, np.asarray(l, dtype=float), side="right")

    def __call__(self, l):
        idx = self.segment_of(l)
        return self.intercepts[idx] + self.slopes[idx] * np.asarray(l, dtype=float)


def slope_at(fit: PiecewiseSupplyFit, l):
    """Slope of the segment containing ``l``; a knot belongs to the upper segment."""
    s = fit.slopes[fit.segment_of(l)]
    return s if np.ndim(s) else float(s)


def _basis(x, knots):
    x = np.asarray(x, dtype=float)
    s = len(knots) + 1
    A = np.empty((len(x), s + 1))
    A[:, 0] = 1.0
    if s == 1:
        A[:, 1] = x
        return A
    A[:, 1] = np.minimum(x, knots[0]) - knots[0]
    for j in range(1, s - 1):
        A[:, j + 1] = np.clip(x, knots[j - 1], knots[j]) - knots[j - 1]
    A[:, s] = np.maximum(x, knots[-1]) - knots[-1]
    return A


def _constrained_fit(x, y, knots):
    """Continuous fit with non-negative slopes. Returns (coef, sse)."""
    A = _basis(x, knots)
    lower = np.r_[-np.inf, np.zeros(A.shape[1] - 1)]
    if A.shape[1] == 2:
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        if coef[1] < 0:
            coef = np.array([y.mean(), 0.0])
    else:
        res = lsq_linear(A, y, bounds=(lower, np.full(A.shape[1], np.inf)), method="bvls", tol=1e-12)
        coef = res.x
        coef[1:] = np.maximum(coef[1:], 0.0)
    r = y - A @ coef
    return coef, float(r @ r)


def _split_positions(n, min_seg, max_candidates):
    stride = max(int(min_seg), int(math.ceil(n / max_candidates)))
    pos = list(range(0, n, stride))
    if n - pos[-1] < min_seg and len(pos) > 1:
        pos.pop()
    pos.append(n)
    return np.array(pos, dtype=np.int64)


def _refine(x, y, knots, sse, rounds=3):
    knots = np.array(knots, dtype=float)
    lo_all, hi_all = x[0], x[-1]
    for _ in range(rounds):
        improved = False
        for j in range(len(knots)):
            lo = knots[j - 1] if j > 0 else lo_all
            hi = knots[j + 1] if j + 1 < len(knots) else hi_all
            if hi - lo <= 1e-9:
                continue

            def obj(t, j=j):
                k = knots.copy()
                k[j] = t
                return _constrained_fit(x, y, k)[1]

            pad = 1e-6 * (hi - lo)
            res = minimize_scalar(obj, bounds=(lo + pad, hi - pad), method="bounded",
                                  options={"xatol": 1e-6 * (hi_all - lo_all)})
            if res.fun < sse - 1e-12 * max(1.0, sse):
                knots[j] = res.x
                sse = float(res.fun)
                improved = True
        if not improved:
            break
    return knots, sse


def fit_piecewise(prices, load, max_segments=6, min_obs_per_segment=10, max_candidates=400,
                  refine=True) -> PiecewiseSupplyFit:
    """Least-squares continuous piecewise-linear price on residual load."""
    p = np.asarray(prices, dtype=float)
    l = np.asarray(load, dtype=float)
    if p.shape != l.shape:
        raise DomainError("prices and load must have the same shape")
    n = len(p)
    if max_segments < 1:
        raise DomainError("max_segments must be >= 1")
    if n < min_obs_per_segment * max_segments:
        raise InfeasibleError(f"{n} observations cannot support {max_segments} segments "
                              f"(need {min_obs_per_segment * max_segments})")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(l))):
        raise DomainError("non-finite input")
    order = np.argsort(l, kind="stable")
    lm, ls = l.mean(), l.std()
    pm, ps = p.mean(), p.std()
    ls = ls if ls > 0 else 1.0
    ps = ps if ps > 0 else 1.0
    x = (l[order] - lm) / ls
    y = (p[order] - pm) / ps

    pos = _split_positions(n, min_obs_per_segment, max_candidates)
    smax = min(max_segments, len(pos) - 1)
    S = np.column_stack([np.ones(n), x, y, x * x, x * y, y * y])
    S = np.vstack([np.zeros(6), np.cumsum(S, axis=0)])[pos]
    _, T = kernels.segreg_dp(np.ascontiguousarray(S), int(smax))

    total = float(y @ y)
    floor = 1e-20 * max(total, 1.0) + 1e-300
    best = None
    for s in range(1, smax + 1):
        splits = []
        b = len(pos) - 1
        for kk in range(s, 1, -1):
            b = int(T[kk, b])
            splits.append(int(pos[b]))
        splits.reverse()
        knots = np.unique([(x[i - 1] + x[i]) / 2.0 for i in splits])
        knots = knots[(knots > x[0]) & (knots < x[-1])]
        if len(knots) != s - 1:
            continue
        _, sse = _constrained_fit(x, y, knots)
        if refine and len(knots):
            knots, sse = _refine(x, y, knots, sse)
        bic = n * math.log(max(sse, floor) / n) + 2 * s * math.log(n)
        if best is None or bic < best[0] - 1e-9:
            best = (bic, knots, sse)
    _, knots, sse = best
    coef, sse = _constrained_fit(x, y, knots)

    # back to original units
    slopes = coef[1:] * ps / ls
    knots_l = knots * ls + lm
    if len(knots):
        v = coef[0] * ps + pm  # value at the first knot
        vals = [v]
        for j in range(1, len(knots)):
            vals.append(vals[-1] + slopes[j] * (knots_l[j] - knots_l[j - 1]))
        anchors = np.r_[knots_l[0], knots_l]
        anchor_vals = np.r_[v, vals]
        intercepts = anchor_vals - slopes * anchors
    else:
        intercepts = np.array([coef[0] * ps + pm - slopes[0] * lm])
    return PiecewiseSupplyFit(knots_l, slopes, intercepts, float(sse * ps * ps), n)


# -- per-hour slopes -----------------------------------------------------------------

@dataclass(frozen=True)
class SlopeParams:
    max_breakpoints: int = 11
    variance_target: float = 0.95
    # candidate breakpoints every `jump` hours
    jump: int = 24
    max_segments: int = 6
    min_obs_per_segment: int = 10


@dataclass(frozen=True)
class SlopeModel:
    hours: np.ndarray
    segmentation: RegimeSegmentation
    fits: tuple

    def regime_of_hours(self, hours) -> np.ndarray:
        starts = np.array([self.hours[a] for a, _ in self.segmentation.bounds])
        return np.searchsorted(starts, np.asarray(hours), side="right") - 1

    def delta(self, hours, load) -> np.ndarray:
        reg = self.regime_of_hours(hours)
        load = np.asarray(load, dtype=float)
        out = np.empty(len(load))
        for r, fit in enumerate(self.fits):
            m = reg == r
            out[m] = slope_at(fit, load[m])
        return out


def fuel_regime_series(market, fuels: FuelParams = FuelParams()) -> np.ndarray:
    gas = carbon_adjust(market.gas_price, fuels.ef_gas, market.carbon_price)
    coal = carbon_adjust(market.coal_price, fuels.ef_hard_coal, market.carbon_price)
    return np.column_stack([gas, coal])


def estimate_slopes(market, params: SlopeParams = SlopeParams(), fuels: FuelParams = FuelParams()) -> SlopeModel:
    """Regimes on the whole sample, then one piecewise fit per regime."""
    X = fuel_regime_series(market, fuels)
    seg = segment_regimes(X, params.max_breakpoints, params.variance_target, params.jump)
    load = residual_load(market)
    fits = []
    for a, b in seg.bounds:
        nobs = b - a
        smax = min(params.max_segments, nobs // params.min_obs_per_segment)
        if smax < 1:
            raise InfeasibleError(f"regime [{a}, {b}) has only {nobs} hours")
        fits.append(fit_piecewise(market.spot_price[a:b], load[a:b], smax, params.min_obs_per_segment))
    return SlopeModel(np.asarray(market.hours), seg, tuple(fits))


def hourly_delta(model: SlopeModel, market) -> np.ndarray:
    return model.delta(market.hours, residual_load(market))


def write_slope_model(model: SlopeModel, regimes_path, fits_path):
    seg = model.segmentation
    rows = []
    for r, (a, b) in enumerate(seg.bounds):
        start, end = format_hours([model.hours[a], model.hours[b - 1]])
        rows.append([str(r), start, end, str(b - a), format_float(seg.centroids[r, 0]),
                     format_float(seg.centroids[r, 1]), format_float(seg.explained_variance)])
    write_rows(regimes_path, REGIME_COLUMNS, rows)
    rows = []
    for r, fit in enumerate(model.fits):
        edges = np.r_[-np.inf, fit.knots, np.inf]
        for j in range(fit.n_segments):
            rows.append([str(r), str(j), format_float(edges[j]), format_float(edges[j + 1]),
                         format_float(fit.intercepts[j]), format_float(fit.slopes[j]),
                         format_float(fit.sse), str(fit.n_obs)])
    write_rows(fits_path, FIT_COLUMNS, rows)


def load_slope_model(regimes_path, fits_path, hours) -> SlopeModel:
    """Rebuild a slope model for the given hour index from the two CSV exports."""
    reg = read_table(regimes_path, REGIME_COLUMNS)
    starts = parse_hours(reg["start_timestamp"], regimes_path)
    ends = parse_hours(reg["end_timestamp"], regimes_path)
    hours = np.asarray(hours)
    if len(starts) == 0 or starts[0] != hours[0] or ends[-1] != hours[-1] or np.any(starts[1:] != ends[:-1] + 1):
        raise ValidationError(f"{regimes_path}: regimes do not tile the market index")
    bps = tuple(int(s - hours[0]) for s in starts[1:])
    cents = np.column_stack([parse_float(reg, "gas_centroid", regimes_path),
                             parse_float(reg, "coal_centroid", regimes_path)])
    ev = float(parse_float(reg, "explained_variance", regimes_path)[0])
    seg = RegimeSegmentation(len(hours), bps, cents, ev, np.array([]))
    fr = read_table(fits_path, FIT_COLUMNS)
    fits = []
    for r in range(len(starts)):
        sub = fr[fr["regime_id"].astype(int) == r].sort_values("segment", key=lambda s: s.astype(int))
        if sub.empty:
            raise ValidationError(f"{fits_path}: no fit for regime {r}")
        fits.append(PiecewiseSupplyFit(
            knots=parse_float(sub, "knot_hi", fits_path)[:-1],
            slopes=parse_float(sub, "slope", fits_path),
            intercepts=parse_float(sub, "intercept", fits_path),
            sse=float(parse_float(sub, "sse", fits_path)[0]),
            n_obs=int(sub["n_obs"].astype(int).iloc[0]),
        ))
    return SlopeModel(hours, seg, tuple(fits))
