"""Hedged quantities, net exposure, margins and net profit from deviating.

Per-MW net profit of withholding is ``delta * E - m`` and of push-in its
negative. Block-level profits replace the marginal change with a finite
withdrawal (or injection) of ``Q`` MW, which adds the self-inflicted price
term ``-delta * Q**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DomainError
from .fuels import FuelParams, unit_variable_cost
from .market_data import format_float, format_hours, hours_to_index, parse_float, parse_hours, read_table, write_rows

DEFAULT_TZ = "Europe/Berlin"
INCENTIVE_COLUMNS = ("timestamp", "unit_id", "delta", "exposure_mw", "margin", "pi_w", "pi_p")
BLOCK_MODES = ("exact", "marginal_scaled")


def _local(hours, tz):
    return hours_to_index(np.atleast_1d(hours)).tz_convert(tz)


def peak_class(hours, tz=DEFAULT_TZ):
    """True for on-peak: 08:00-20:00 local time, Monday to Friday."""
    loc = _local(hours, tz)
    on = (loc.hour >= 8) & (loc.hour < 20) & (loc.dayofweek < 5)
    on = np.asarray(on, dtype=bool)
    return on if np.ndim(hours) else bool(on[0])


def month_key(hours, tz=DEFAULT_TZ) -> np.ndarray:
    loc = _local(hours, tz)
    return np.asarray(loc.year * 100 + loc.month, dtype=np.int64)


def hedged_quantity(company_generation, hours, month, on_peak, r, tz=DEFAULT_TZ) -> float:
    """``r`` times mean company output over the month's hours of one peak class."""
    g = np.asarray(company_generation, dtype=float)
    sel = (month_key(hours, tz) == month) & (peak_class(hours, tz) == bool(on_peak))
    if not sel.any():
        raise DomainError(f"no {'on' if on_peak else 'off'}-peak hours in month {month}")
    return float(r * g[sel].mean())


def hedge_book(company_generation, hours, r, tz=DEFAULT_TZ):
    """Hedged MW per hour for each column of ``company_generation``.

    Returns (hourly Q array, long table of company-month-class cells).
    """
    if not 0 <= r <= 1:
        raise DomainError("hedge rate must lie in [0, 1]")
    G = np.asarray(company_generation, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    cell = month_key(hours, tz) * 2 + peak_class(hours, tz).astype(np.int64)
    codes, inv = np.unique(cell, return_inverse=True)
    inv = inv.reshape(-1)
    counts = np.bincount(inv, minlength=len(codes)).astype(float)
    Q = np.empty_like(G)
    rows = []
    for j in range(G.shape[1]):
        sums = np.bincount(inv, weights=G[:, j], minlength=len(codes))
        q = r * (sums / counts)
        Q[:, j] = q[inv]
        rows.append(q)
    table = pd.DataFrame({
        "month": np.tile(codes // 2, G.shape[1]),
        "on_peak": np.tile(codes % 2 == 1, G.shape[1]),
        "column": np.repeat(np.arange(G.shape[1]), len(codes)),
        "hedged_mw": np.concatenate(rows) if rows else np.array([]),
        "hedge_rate": r,
    })
    return Q, table


def net_exposure(company_generation, hedged):
    return np.asarray(company_generation, dtype=float) - np.asarray(hedged, dtype=float)


def margin(spot_price, variable_cost):
    return np.asarray(spot_price, dtype=float) - np.asarray(variable_cost, dtype=float)


def net_profit_withhold(delta, exposure, margin):
    """EUR per MW withheld."""
    return np.asarray(delta) * np.asarray(exposure) - np.asarray(margin)


def net_profit_pushin(delta, exposure, margin):
    """EUR per MW pushed in."""
    return -np.asarray(delta) * np.asarray(exposure) + np.asarray(margin)


def block_net_profit(delta, exposure, margin, q_block, mode="exact", direction="withhold"):
    """Profit change in EUR from moving ``q_block`` MW at once."""
    q = np.asarray(q_block, dtype=float)
    if np.any(q <= 0):
        raise DomainError("block size must be positive")
    if mode not in BLOCK_MODES:
        raise DomainError(f"unknown block mode {mode!r}")
    if direction == "withhold":
        lin = q * net_profit_withhold(delta, exposure, margin)
    elif direction == "pushin":
        lin = q * net_profit_pushin(delta, exposure, margin)
    else:
        raise DomainError(f"unknown direction {direction!r}")
    if mode == "marginal_scaled":
        return lin
    return lin - np.asarray(delta) * q * q


def company_generation(units, generation):
    """(hours, companies) sum of observed output over every unit a company owns."""
    companies = sorted({u.company_id for u in units})
    G = np.zeros((generation.mw.shape[0], len(companies)))
    for u in units:
        G[:, companies.index(u.company_id)] += generation.column(u.unit_id)
    return companies, G


@dataclass(frozen=True)
class IncentiveInputs:
    """Hourly quantities shared by every unit: slopes and company exposure."""

    delta: np.ndarray
    companies: list
    exposure: np.ndarray
    hedged: np.ndarray


def exposure_inputs(units, generation, hours, delta, r, tz=DEFAULT_TZ) -> IncentiveInputs:
    companies, G = company_generation(units, generation)
    Q, _ = hedge_book(G, hours, r, tz)
    return IncentiveInputs(np.asarray(delta, dtype=float), companies, net_exposure(G, Q), Q)


def build_incentive_panel(market, units, generation, available, delta, r,
                          fuels: FuelParams = FuelParams(), tz=DEFAULT_TZ) -> pd.DataFrame:
    """Long panel over available in-scope unit-hours, hour-major."""
    inputs = exposure_inputs(units, generation, market.hours, delta, r, tz)
    scoped = [(j, u) for j, u in enumerate(units) if u.in_scope]
    n = len(market)
    D = np.empty((n, len(scoped)))
    E = np.empty_like(D)
    M = np.empty_like(D)
    for k, (_, u) in enumerate(scoped):
        D[:, k] = inputs.delta
        E[:, k] = inputs.exposure[:, inputs.companies.index(u.company_id)]
        M[:, k] = margin(market.spot_price, unit_variable_cost(u, market, fuels))
    avail = available[:, [j for j, _ in scoped]]
    hh, uu = np.nonzero(avail)
    ids = np.array([u.unit_id for _, u in scoped], dtype=object)
    d, e, m = D[hh, uu], E[hh, uu], M[hh, uu]
    return pd.DataFrame({
        "hour": np.asarray(market.hours)[hh],
        "unit_id": ids[uu],
        "delta": d,
        "exposure_mw": e,
        "margin": m,
        "pi_w": net_profit_withhold(d, e, m),
        "pi_p": net_profit_pushin(d, e, m),
    })


def write_incentive_panel(panel: pd.DataFrame, path):
    ts = format_hours(panel["hour"].to_numpy())
    cols = [panel[c].to_numpy() for c in INCENTIVE_COLUMNS[2:]]
    rows = ([t, uid] + [format_float(c[i]) for c in cols]
            for i, (t, uid) in enumerate(zip(ts, panel["unit_id"])))
    write_rows(path, INCENTIVE_COLUMNS, rows)


def load_incentive_panel(path) -> pd.DataFrame:
    frame = read_table(path, INCENTIVE_COLUMNS)
    out = {"hour": parse_hours(frame["timestamp"], path),
           "unit_id": frame["unit_id"].astype(str).to_numpy(dtype=object)}
    for c in INCENTIVE_COLUMNS[2:]:
        out[c] = parse_float(frame, c, path)
    return pd.DataFrame(out)
