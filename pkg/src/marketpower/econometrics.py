"""Regime-switching logit linking dispatch deviations to net profit.

Two independent binary logits: missing dispatch (y = -1) among hours where the
benchmark runs the unit (z = 1) against the withholding profit, and surplus
dispatch (y = +1) among hours where it does not (z = 0) against the push-in
profit. The design matrix is always ``[1, pi]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.stats import norm

from .errors import DomainError, SeparationError
from .hedging import DEFAULT_TZ
from .market_data import hours_to_index

# on the standardised predictor; beyond this the likelihood is flat toward infinity
SEPARATION_LIMIT = 50.0


@dataclass(frozen=True)
class LogitFit:
    beta0: float
    beta1: float
    se0: float
    se1: float
    ll: float
    ll0: float
    mcfadden_r2: float
    n: int
    converged: bool
    iterations: int
    grad_norm: float
    cov: np.ndarray = field(repr=False, compare=False)
    ll_path: tuple = field(default=(), repr=False, compare=False)

    @property
    def pvalue1(self) -> float:
        if not self.se1 > 0:
            return float("nan")
        return float(2 * norm.sf(abs(self.beta1 / self.se1)))

    @property
    def stars(self) -> str:
        p = self.pvalue1
        if p <= 0.001:
            return "***"
        if p <= 0.01:
            return "**"
        if p <= 0.05:
            return "*"
        return ""

    def wald_interval(self, level=0.95):
        zq = norm.ppf(0.5 + level / 2)
        return self.beta1 - zq * self.se1, self.beta1 + zq * self.se1

    def as_dict(self):
        d = asdict(self)
        d.pop("cov")
        d.pop("ll_path")
        d["stars"] = self.stars
        return d


def _loglik(eta, y):
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def null_loglik(y) -> float:
    y = np.asarray(y, dtype=float)
    n, k = len(y), y.sum()
    if k == 0 or k == n:
        return 0.0
    p = k / n
    return float(k * math.log(p) + (n - k) * math.log(1 - p))


def fit_logit(x, y, max_iter=100, tol_ll=1e-10, tol_grad=1e-8) -> LogitFit:
    """Maximum-likelihood logit of binary ``y`` on scalar ``x`` by Newton steps.

    Newton iterations run on a standardised predictor with step halving, so
    each accepted step weakly increases the log-likelihood. Standard errors
    come from the inverse observed information.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be 1-d arrays of equal length")
    if len(x) < 2:
        raise DomainError("need at least two observations")
    if not np.all(np.isfinite(x)):
        raise DomainError("predictor has non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("outcome must be 0/1")
    k = y.sum()
    if k == 0 or k == len(y):
        raise SeparationError(f"outcome has a single class ({'all 0' if k == 0 else 'all 1'}, n={len(y)})")
    mu, sd = x.mean(), x.std()
    if not sd > 0:
        raise DomainError("predictor is constant")
    xs = (x - mu) / sd
    X = np.column_stack([np.ones_like(xs), xs])

    theta = np.array([math.log(k / (len(y) - k)), 0.0])
    ll = _loglik(X @ theta, y)
    path = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(X @ theta)
        g = X.T @ (y - p)
        w = p * (1 - p)
        H = (X * w[:, None]).T @ X
        if np.linalg.norm(g) < tol_grad:
            converged = True
            break
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while True:
            cand = theta + t * step
            ll_new = _loglik(X @ cand, y)
            if ll_new >= ll - 1e-12 * abs(ll) or t < 1e-10:
                break
            t *= 0.5
        change = abs(ll_new - ll) / max(abs(ll), 1e-300)
        theta, ll = cand, ll_new
        path.append(ll)
        if np.any(np.abs(theta) > SEPARATION_LIMIT):
            raise SeparationError(
                f"coefficients diverge (|theta| > {SEPARATION_LIMIT} on the standardised "
                f"predictor): the outcome is (quasi-)separated by the predictor")
        if change < tol_ll:
            # one polishing step at the optimum
            p = expit(X @ theta)
            g = X.T @ (y - p)
            w = p * (1 - p)
            H = (X * w[:, None]).T @ X
            cand = theta + np.linalg.solve(H, g)
            ll_c = _loglik(X @ cand, y)
            if ll_c >= ll:
                theta, ll = cand, ll_c
                path.append(ll)
            converged = True
            break
    if not converged:
        raise SeparationError(f"no convergence after {max_iter} iterations; likely separation")

    a, b = theta
    beta1 = b / sd
    beta0 = a - b * mu / sd
    p = expit(X @ theta)
    w = p * (1 - p)
    H = (X * w[:, None]).T @ X
    J = np.array([[1.0, -mu / sd], [0.0, 1.0 / sd]])
    try:
        cov = J @ np.linalg.inv(H) @ J.T
        se = np.sqrt(np.diag(cov))
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.nan)
        se = np.array([np.nan, np.nan])
    Xo = np.column_stack([np.ones_like(x), x])
    grad = Xo.T @ (y - expit(beta0 + beta1 * x))
    ll0 = null_loglik(y)
    r2 = 1.0 - ll / ll0 if ll0 != 0 else 0.0
    return LogitFit(float(beta0), float(beta1), float(se[0]), float(se[1]), float(ll), float(ll0),
                    float(max(r2, 0.0)), int(len(y)), converged, it, float(np.linalg.norm(grad)), cov, tuple(path))


def predict_prob(fit, pi):
    """Logistic probability; ``fit`` is a LogitFit or a (beta0, beta1) pair."""
    b0, b1 = (fit.beta0, fit.beta1) if isinstance(fit, LogitFit) else fit
    out = expit(b0 + b1 * np.asarray(pi, dtype=float))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class Skipped:
    reason: str
    n: int = 0

    def as_dict(self):
        return {"skipped": True, "reason": self.reason, "n": self.n}


REGIMES = {
    # name: (benchmark state, deviation code, default predictor)
    "withhold": (1.0, -1.0, "pi_w"),
    "pushin": (0.0, 1.0, "pi_p"),
}


def regime_data(panel: pd.DataFrame, regime, predictor=None):
    z, code, default = REGIMES[regime]
    col = predictor or default
    sub = panel[(panel["z"] == z) & panel["y"].notna()]
    return sub[col].to_numpy(dtype=float), (sub["y"].to_numpy() == code).astype(float)


def _fit_or_skip(x, y):
    if len(x) == 0:
        return Skipped("empty regime", 0)
    try:
        return fit_logit(x, y)
    except (SeparationError, DomainError) as exc:
        return Skipped(str(exc), len(x))


def regime_split_fit(panel: pd.DataFrame, withhold_col="pi_w", pushin_col="pi_p"):
    """(withholding fit, push-in fit); a regime that cannot be fitted is Skipped."""
    out = []
    for regime, col in (("withhold", withhold_col), ("pushin", pushin_col)):
        x, y = regime_data(panel, regime, col)
        out.append(_fit_or_skip(x, y))
    return tuple(out)


def annotate(panel: pd.DataFrame, units, tz=DEFAULT_TZ) -> pd.DataFrame:
    """Add year, fuel type, company and unit size columns used for grouping."""
    by_id = {u.unit_id: u for u in units}
    out = panel.copy()
    out["year"] = np.asarray(hours_to_index(out["hour"].to_numpy()).tz_convert(tz).year, dtype=np.int64)
    out["fuel_type"] = [by_id[u].fuel_type for u in out["unit_id"]]
    out["company"] = [by_id[u].company_id for u in out["unit_id"]]
    out["capacity"] = [by_id[u].capacity for u in out["unit_id"]]
    out["min_load"] = [by_id[u].min_load for u in out["unit_id"]]
    return out


def subgroup_fits(panel: pd.DataFrame, grouping, **cols):
    """Regime-split fits per value of ``grouping`` (year, fuel_type or company)."""
    if grouping not in panel.columns:
        raise DomainError(f"panel has no '{grouping}' column")
    return {key: regime_split_fit(sub, **cols) for key, sub in panel.groupby(grouping, sort=True)}


def hedge_sensitivity(incentives_for_rate, dispatch_panel: pd.DataFrame, rates):
    """Refit both regimes with the incentive panel recomputed at every hedge rate.

    ``incentives_for_rate(r)`` must return the incentive panel row-aligned
    with ``dispatch_panel``.
    """
    rows = []
    for r in rates:
        if not 0 <= r <= 1:
            raise DomainError("hedge rates must lie in [0, 1]")
        inc = incentives_for_rate(r)
        joined = dispatch_panel.assign(pi_w=inc["pi_w"].to_numpy(), pi_p=inc["pi_p"].to_numpy())
        w, p = regime_split_fit(joined)
        rows.append({"hedge_rate": r, "withhold": w, "pushin": p})
    return rows
