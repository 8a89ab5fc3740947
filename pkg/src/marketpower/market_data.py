"""Loading, validation and alignment of the hourly input panels.

All timestamps are held as UTC epoch hours (int64). Files use ISO-8601
timestamps; the canonical writer emits ``YYYY-MM-DDTHH:MM:SSZ`` and the
shortest round-tripping float representation, so ``write(load(f)) == f`` for
files already in canonical form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    ParseError,
    SchemaError,
    UnitReferenceError,
    ValidationError,
)

MARKET_COLUMNS = (
    "timestamp",
    "spot_price",
    "demand",
    "vre_generation",
    "gas_price",
    "coal_price",
    "carbon_price",
)
UNIT_COLUMNS = (
    "unit_id",
    "company_id",
    "fuel_type",
    "capacity_mw",
    "min_load_mw",
    "efficiency",
    "startup_depreciation_eur_mw",
    "cold_start_fuel_mwh_mw",
    "cold_start_factor",
)
GENERATION_COLUMNS = ("timestamp", "unit_id", "generation_mw")
OUTAGE_COLUMNS = ("timestamp", "unit_id", "available")
FUEL_TYPES = ("lignite", "hard_coal", "ccgt", "gas_other")

_EPOCH = pd.Timestamp("1970-01-01", tz="UTC")


# -- timestamp helpers -------------------------------------------------------

def hours_to_index(hours) -> pd.DatetimeIndex:
    return pd.DatetimeIndex(_EPOCH + pd.to_timedelta(np.asarray(hours, dtype=np.int64), unit="h"))


def format_hours(hours) -> list[str]:
    return list(hours_to_index(hours).strftime("%Y-%m-%dT%H:%M:%SZ"))


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NA"
    return repr(x)


def parse_hours(values, path) -> np.ndarray:
    values = pd.Series(values)
    ts = pd.to_datetime(values, utc=True, format="ISO8601", errors="coerce")
    bad = np.flatnonzero(ts.isna().to_numpy())
    if bad.size:
        row = int(bad[0])
        raise ParseError(f"{path}: unparseable timestamp {values.iloc[row]!r} at row {row}", row=row)
    delta = (ts - _EPOCH).dt.total_seconds().to_numpy()
    if np.any(delta % 3600 != 0):
        row = int(np.flatnonzero(delta % 3600 != 0)[0])
        raise AlignmentError(f"{path}: timestamp not on the hour at row {row}", timestamp=values.iloc[row])
    return (delta // 3600).astype(np.int64)


def to_floats(values) -> np.ndarray:
    """Exact (correctly rounded) string-to-float conversion; unparseable cells become NaN.

    pandas' own numeric parser is not always correctly rounded, which would
    break the ``write(load(f)) == f`` round trip.
    """
    arr = np.asarray(values, dtype=object)
    try:
        return arr.astype(float)
    except (ValueError, TypeError):
        out = np.empty(len(arr))
        for i, v in enumerate(arr):
            try:
                out[i] = float(v)
            except (ValueError, TypeError):
                out[i] = np.nan
        return out


def parse_float(frame, column, path) -> np.ndarray:
    raw = frame[column]
    vals = to_floats(raw)
    bad = np.flatnonzero(np.isnan(vals))
    if bad.size:
        row = int(bad[0])
        cell = raw.iloc[row]
        what = "missing value" if cell is None or (isinstance(cell, float) and math.isnan(cell)) or str(cell).strip() == "" else f"non-numeric value {cell!r}"
        raise ParseError(f"{path}: {what} in column '{column}' at row {row}", row=row)
    return vals


def read_table(path, columns) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[])
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    return frame


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- market series -------------------------------------------------------------

@dataclass(frozen=True)
class MarketSeries:
    hours: np.ndarray
    spot_price: np.ndarray
    demand: np.ndarray
    vre_generation: np.ndarray
    gas_price: np.ndarray
    coal_price: np.ndarray
    carbon_price: np.ndarray

    def __post_init__(self):
        for name in MARKET_COLUMNS[1:] + ("hours",):
            arr = np.asarray(getattr(self, name), dtype=np.int64 if name == "hours" else float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.validate()

    def __len__(self):
        return len(self.hours)

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return hours_to_index(self.hours)

    def validate(self):
        n = len(self.hours)
        if n == 0:
            raise ValidationError("market series is empty")
        for name in MARKET_COLUMNS[1:]:
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValidationError(f"series '{name}' has length {arr.shape[0]}, expected {n}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"series '{name}' has non-finite values")
        steps = np.diff(self.hours)
        if np.any(steps != 1):
            i = int(np.flatnonzero(steps != 1)[0])
            ts = format_hours(self.hours[i + 1:i + 2])[0]
            kind = "gap" if steps[i] > 1 else "non-increasing step"
            raise AlignmentError(f"hourly {kind} before {ts} (after row {i})", timestamp=ts)
        for name in ("demand", "vre_generation", "gas_price", "coal_price", "carbon_price"):
            arr = getattr(self, name)
            if np.any(arr < 0):
                i = int(np.flatnonzero(arr < 0)[0])
                raise ValidationError(f"negative {name} ({arr[i]}) at row {i}")

    def slice(self, lo, hi) -> MarketSeries:
        return MarketSeries(**{k: getattr(self, k)[lo:hi] for k in ("hours",) + MARKET_COLUMNS[1:]})


def load_market(path) -> MarketSeries:
    frame = read_table(path, MARKET_COLUMNS)
    hours = parse_hours(frame["timestamp"], path)
    cols = {c: parse_float(frame, c, path) for c in MARKET_COLUMNS[1:]}
    return MarketSeries(hours=hours, **cols)


def write_market(ms: MarketSeries, path):
    ts = format_hours(ms.hours)
    cols = [getattr(ms, c) for c in MARKET_COLUMNS[1:]]
    rows = ([t] + [format_float(c[i]) for c in cols] for i, t in enumerate(ts))
    write_rows(path, MARKET_COLUMNS, rows)


def residual_load(ms: MarketSeries) -> np.ndarray:
    """Demand minus variable renewable generation, MW. May be negative."""
    return ms.demand - ms.vre_generation


# -- units -------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitSpec:
    unit_id: str
    company_id: str
    fuel_type: str
    capacity: float
    min_load: float
    efficiency: float
    startup_depreciation: float
    cold_start_fuel: float
    cold_start_factor: float
    # out-of-scope units only add to company generation
    in_scope: bool = True

    def __post_init__(self):
        if not self.in_scope:
            if self.capacity < 0:
                raise ValidationError(f"unit {self.unit_id}: negative capacity")
            return
        if self.fuel_type not in FUEL_TYPES:
            raise ValidationError(f"unit {self.unit_id}: unknown fuel type {self.fuel_type!r}")
        if not 0 < self.min_load < self.capacity:
            raise ValidationError(f"unit {self.unit_id}: need 0 < min_load < capacity")
        if not 0 < self.efficiency < 1:
            raise ValidationError(f"unit {self.unit_id}: efficiency must lie in (0, 1)")
        for name in ("startup_depreciation", "cold_start_fuel", "cold_start_factor"):
            if getattr(self, name) < 0:
                raise ValidationError(f"unit {self.unit_id}: negative {name}")


def load_units(path) -> list[UnitSpec]:
    frame = read_table(path, UNIT_COLUMNS)
    in_scope = frame["in_scope"] if "in_scope" in frame.columns else pd.Series(["1"] * len(frame))
    units = []
    seen = set()
    for row, rec in enumerate(frame.to_dict("records")):
        flag = str(in_scope.iloc[row]).strip()
        if flag not in ("0", "1"):
            raise ParseError(f"{path}: in_scope must be 0 or 1 at row {row}", row=row)
        scoped = flag == "1"
        vals = {}
        for key, col in (
            ("capacity", "capacity_mw"),
            ("min_load", "min_load_mw"),
            ("efficiency", "efficiency"),
            ("startup_depreciation", "startup_depreciation_eur_mw"),
            ("cold_start_fuel", "cold_start_fuel_mwh_mw"),
            ("cold_start_factor", "cold_start_factor"),
        ):
            cell = str(rec[col]).strip()
            if cell == "" and not scoped and key != "capacity":
                vals[key] = float("nan")
                continue
            try:
                vals[key] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: bad value {cell!r} in column '{col}' at row {row}", row=row) from None
        uid = str(rec["unit_id"])
        if uid in seen:
            raise ValidationError(f"{path}: duplicate unit_id {uid!r}")
        seen.add(uid)
        units.append(UnitSpec(uid, str(rec["company_id"]), str(rec["fuel_type"]), in_scope=scoped, **vals))
    return units


def write_units(units, path):
    header = UNIT_COLUMNS + ("in_scope",)
    rows = []
    for u in units:
        rows.append([
            u.unit_id, u.company_id, u.fuel_type,
            format_float(u.capacity),
            *("" if math.isnan(v) else format_float(v) for v in (
                u.min_load, u.efficiency, u.startup_depreciation,
                u.cold_start_fuel, u.cold_start_factor)),
            "1" if u.in_scope else "0",
        ])
    write_rows(path, header, rows)


# -- long-format unit-hour panels ---------------------------------------------------

@dataclass(frozen=True)
class ObservedGeneration:
    """Observed MW per hour (rows) and unit (columns)."""

    hours: np.ndarray
    unit_ids: tuple
    mw: np.ndarray

    def column(self, unit_id) -> np.ndarray:
        return self.mw[:, self.unit_ids.index(unit_id)]


@dataclass(frozen=True)
class OutageMask:
    """True where the unit is available."""

    hours: np.ndarray
    unit_ids: tuple
    available: np.ndarray = field(repr=False)

    def column(self, unit_id) -> np.ndarray:
        return self.available[:, self.unit_ids.index(unit_id)]


def _pivot(path, columns, value_col, hours, unit_ids, kind):
    frame = read_table(path, columns)
    h = parse_hours(frame["timestamp"], path)
    values = parse_float(frame, value_col, path)
    ids = frame["unit_id"].astype(str).to_numpy()
    known = {u: j for j, u in enumerate(unit_ids)}
    unknown = sorted(set(ids) - set(known))
    if unknown:
        raise UnitReferenceError(f"{path}: unit(s) {unknown[:5]} absent from the unit list")
    pos = h - hours[0]
    outside = (pos < 0) | (pos >= len(hours))
    if np.any(outside):
        row = int(np.flatnonzero(outside)[0])
        raise AlignmentError(f"{path}: timestamp outside the market index at row {row}",
                             timestamp=frame["timestamp"].iloc[row])
    col = np.fromiter((known[u] for u in ids), dtype=np.int64, count=len(ids))
    out = np.full((len(hours), len(unit_ids)), np.nan)
    seen = np.zeros(out.shape, dtype=bool)
    flat = pos * len(unit_ids) + col
    if len(np.unique(flat)) != len(flat):
        raise ValidationError(f"{path}: duplicate (timestamp, unit_id) rows")
    out[pos, col] = values
    seen[pos, col] = True
    if not seen.all():
        r, c = np.argwhere(~seen)[0]
        raise ValidationError(f"{path}: no {kind} row for unit {unit_ids[c]} at {format_hours([hours[r]])[0]}")
    return out


def load_generation(path, units, hours) -> ObservedGeneration:
    unit_ids = tuple(u.unit_id for u in units)
    mw = _pivot(path, GENERATION_COLUMNS, "generation_mw", hours, unit_ids, "generation")
    for j, u in enumerate(units):
        if np.any(mw[:, j] < 0):
            raise ValidationError(f"negative generation for unit {u.unit_id}")
    return ObservedGeneration(np.asarray(hours), unit_ids, mw)


def write_generation(gen: ObservedGeneration, path):
    ts = format_hours(gen.hours)
    rows = ([t, u, format_float(gen.mw[i, j])]
            for i, t in enumerate(ts) for j, u in enumerate(gen.unit_ids))
    write_rows(path, GENERATION_COLUMNS, rows)


def load_outages(path, units, hours) -> OutageMask:
    unit_ids = tuple(u.unit_id for u in units)
    flags = _pivot(path, OUTAGE_COLUMNS, "available", hours, unit_ids, "availability")
    if not np.all(np.isin(flags, (0.0, 1.0))):
        raise ValidationError(f"{path}: 'available' must be 0 or 1")
    return OutageMask(np.asarray(hours), unit_ids, flags.astype(bool))


def write_outages(mask: OutageMask, path):
    ts = format_hours(mask.hours)
    rows = ([t, u, "1" if mask.available[i, j] else "0"]
            for i, t in enumerate(ts) for j, u in enumerate(mask.unit_ids))
    write_rows(path, OUTAGE_COLUMNS, rows)


def check_generation_bounds(gen: ObservedGeneration, units, mask: OutageMask, tol=1e-6):
    """Observed output must not exceed capacity in available hours."""
    for j, u in enumerate(units):
        if not u.in_scope:
            continue
        col = gen.column(u.unit_id)
        avail = mask.column(u.unit_id)
        over = avail & (col > u.capacity + tol)
        if np.any(over):
            i = int(np.flatnonzero(over)[0])
            raise ValidationError(f"unit {u.unit_id}: generation {col[i]} exceeds capacity at row {i}")


def availability_filter(units, mask: OutageMask) -> np.ndarray:
    """Boolean (hour, unit) array of available unit-hours, columns in ``units`` order."""
    ids = [u.unit_id for u in units]
    stray = sorted(set(mask.unit_ids) - set(ids))
    if stray:
        raise UnitReferenceError(f"outage mask references unknown unit(s) {stray[:5]}")
    missing = sorted(set(ids) - set(mask.unit_ids))
    if missing:
        raise UnitReferenceError(f"outage mask does not cover unit(s) {missing[:5]}")
    order = [mask.unit_ids.index(u) for u in ids]
    return mask.available[:, order].copy()


def all_available(units, hours) -> OutageMask:
    ids = tuple(u.unit_id for u in units)
    return OutageMask(np.asarray(hours), ids, np.ones((len(hours), len(ids)), dtype=bool))
