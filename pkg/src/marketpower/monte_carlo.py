"""Parameter-uncertainty simulation around the competitive dispatch benchmark.

Every (seed, unit, iteration) triple owns an independent Philox stream, so the
averaged state does not depend on execution order or worker count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import kernels
from .dispatch import HORIZON_HOURS, OVERLAP_HOURS
from .errors import ConfigError, DomainError, ShapeError, ValidationError
from .fuels import FuelParams, carbon_series, fuel_series
from .market_data import format_float, format_hours, parse_float, parse_hours, read_table, to_floats, write_rows

MIN_MULTIPLIER = 0.01
PANEL_COLUMNS = ("timestamp", "unit_id", "d_bar", "z", "d_observed", "y")


@dataclass(frozen=True)
class McConfig:
    iterations: int = 1000
    multiplier_sd: float = 0.05
    seed: int = 0
    keep_threshold: float = 0.95
    # MW above which observed output counts as "on"
    dispatch_epsilon: float = 1.0
    horizon: int = HORIZON_HOURS
    overlap: int = OVERLAP_HOURS

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0 <= self.multiplier_sd < 1:
            raise ConfigError("multiplier_sd must lie in [0, 1)")
        if not 0.5 < self.keep_threshold <= 1:
            raise ConfigError("keep_threshold must lie in (0.5, 1]")


def _unit_key(unit_id) -> int:
    digest = hashlib.blake2b(str(unit_id).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _stream(seed, unit_id, iteration) -> np.random.Generator:
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, _unit_key(unit_id)], dtype=np.uint64)
    counter = np.array([0, int(iteration), 0, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def sample_multipliers(seed, unit_id, iteration, sd=0.05):
    """(efficiency, fuel cost, cold-start factor) multipliers ~ N(1, sd**2)."""
    z = _stream(seed, unit_id, iteration).standard_normal(3)
    m = np.maximum(1.0 + sd * z, MIN_MULTIPLIER)
    return float(m[0]), float(m[1]), float(m[2])


def multiplier_matrix(seed, unit_id, iterations, sd=0.05) -> np.ndarray:
    return np.array([sample_multipliers(seed, unit_id, n, sd) for n in range(iterations)])


def average_state(states) -> np.ndarray:
    """Share of iterations in which the unit is on, per hour."""
    try:
        arr = np.asarray([np.asarray(s, dtype=float) for s in states])
    except ValueError:
        raise ShapeError("state sequences differ in length") from None
    if arr.ndim != 2:
        raise ShapeError("state sequences differ in length")
    return arr.mean(axis=0)


def discretize(d_bar, keep_threshold=0.95):
    """1 where d_bar >= keep, 0 where d_bar <= 1 - keep, NaN (excluded) otherwise."""
    d = np.asarray(d_bar, dtype=float)
    if np.any((d < 0) | (d > 1)) or np.any(np.isnan(d)):
        raise DomainError("average state must lie in [0, 1]")
    out = np.full(d.shape, np.nan)
    out[d >= keep_threshold] = 1.0
    out[d <= 1.0 - keep_threshold] = 0.0
    return out if out.ndim else float(out)


def deviation(d_observed, z):
    """+1 surplus dispatch, -1 missing dispatch, 0 agreement, NaN where z excluded."""
    d = np.asarray(d_observed, dtype=float)
    z = np.asarray(z, dtype=float)
    out = d - z
    return out if out.ndim else float(out)


def observed_state(mw, epsilon=1.0):
    return (np.asarray(mw, dtype=float) > epsilon).astype(np.int8)


def simulate_unit(unit, market, cfg: McConfig, fuels: FuelParams = FuelParams()) -> np.ndarray:
    """Average competitive state over all iterations for one unit."""
    mult = multiplier_matrix(cfg.seed, unit.unit_id, cfg.iterations, cfg.multiplier_sd)
    counts = kernels.mc_on_counts(
        np.ascontiguousarray(market.spot_price, dtype=float),
        np.ascontiguousarray(fuel_series(unit.fuel_type, market, fuels)),
        np.ascontiguousarray(carbon_series(unit.fuel_type, market, fuels)),
        float(unit.capacity), float(unit.min_load), float(unit.efficiency),
        float(unit.startup_depreciation), float(unit.cold_start_fuel),
        float(unit.cold_start_factor), np.ascontiguousarray(mult),
        False, int(cfg.horizon), int(cfg.overlap),
    )
    return counts / cfg.iterations


def _simulate_job(args):
    return simulate_unit(*args)


def simulate_fleet(units, market, cfg: McConfig, fuels: FuelParams = FuelParams(), jobs=1) -> np.ndarray:
    """(hours, units) array of average states for in-scope units."""
    if len(market) < cfg.overlap:
        raise DomainError(f"sample shorter than {cfg.overlap} hours")
    tasks = [(u, market, cfg, fuels) for u in units]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            cols = list(ex.map(_simulate_job, tasks))
    else:
        cols = [_simulate_job(t) for t in tasks]
    return np.column_stack(cols) if cols else np.zeros((len(market), 0))


def build_dispatch_panel(market, units, generation, available, d_bar, cfg: McConfig) -> pd.DataFrame:
    """Long panel over available unit-hours (hour-major, units in list order)."""
    mw = np.column_stack([generation.column(u.unit_id) for u in units])
    z = discretize(d_bar, cfg.keep_threshold)
    d_obs = observed_state(mw, cfg.dispatch_epsilon)
    y = deviation(d_obs, z)
    hh, uu = np.nonzero(available)
    ids = np.array([u.unit_id for u in units], dtype=object)
    return pd.DataFrame({
        "hour": np.asarray(market.hours)[hh],
        "unit_id": ids[uu],
        "d_bar": d_bar[hh, uu],
        "z": z[hh, uu],
        "d_observed": d_obs[hh, uu].astype(np.int64),
        "y": y[hh, uu],
    })


def run_dispatch(market, units, generation, available, cfg: McConfig,
                 fuels: FuelParams = FuelParams(), jobs=1) -> pd.DataFrame:
    scoped = [u for u in units if u.in_scope]
    cols = [i for i, u in enumerate(units) if u.in_scope]
    d_bar = simulate_fleet(scoped, market, cfg, fuels, jobs)
    return build_dispatch_panel(market, scoped, generation, available[:, cols], d_bar, cfg)


def _fmt_code(v):
    return "NA" if np.isnan(v) else str(int(v))


def write_dispatch_panel(panel: pd.DataFrame, path):
    ts = format_hours(panel["hour"].to_numpy())
    rows = zip(ts, panel["unit_id"], map(format_float, panel["d_bar"]), map(_fmt_code, panel["z"]),
               map(str, panel["d_observed"]), map(_fmt_code, panel["y"]))
    write_rows(path, PANEL_COLUMNS, rows)


def _codes(series, allowed, path, col):
    raw = series.to_numpy(dtype=object)
    vals = to_floats(np.where(raw == "NA", "nan", raw))
    bad = (np.isnan(vals) & (raw != "NA")) | (~np.isnan(vals) & ~np.isin(vals, allowed))
    if bad.any():
        raise ValidationError(f"{path}: invalid code in column '{col}' at row {int(np.flatnonzero(bad)[0])}")
    return vals


def load_dispatch_panel(path) -> pd.DataFrame:
    frame = read_table(path, PANEL_COLUMNS)
    panel = pd.DataFrame({
        "hour": parse_hours(frame["timestamp"], path),
        "unit_id": frame["unit_id"].astype(str).to_numpy(dtype=object),
        "d_bar": parse_float(frame, "d_bar", path),
        "z": _codes(frame["z"], (0, 1), path, "z"),
        "d_observed": _codes(frame["d_observed"], (0, 1), path, "d_observed").astype(np.int64),
        "y": _codes(frame["y"], (-1, 0, 1), path, "y"),
    })
    if np.any((panel["d_bar"] < 0) | (panel["d_bar"] > 1)):
        raise ValidationError(f"{path}: d_bar outside [0, 1]")
    return panel
