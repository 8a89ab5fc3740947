"""Stage orchestration, configuration and report tables.

Stages: ingest -> dispatch -> slope -> incentives -> fit -> report. Each stage
writes its outputs to the bundle directory as soon as it finishes, so any
stage can be rerun from the cached panels of its predecessors.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .econometrics import (
    LogitFit,
    Skipped,
    annotate,
    predict_prob,
    regime_data,
    regime_split_fit,
)
from .errors import (
    AlignmentError,
    ConfigError,
    DomainError,
    InfeasibleError,
    MarketPowerError,
    StageError,
    ValidationError,
)
from .fuels import FuelParams
from .hedging import (
    BLOCK_MODES,
    DEFAULT_TZ,
    block_net_profit,
    build_incentive_panel,
    load_incentive_panel,
    write_incentive_panel,
)
from .market_data import (
    all_available,
    availability_filter,
    check_generation_bounds,
    hours_to_index,
    load_generation,
    load_market,
    load_outages,
    load_units,
    format_float,
    format_hours,
    write_rows,
)
from .monte_carlo import McConfig, load_dispatch_panel, run_dispatch, write_dispatch_panel
from .supply_curve import SlopeParams, estimate_slopes, hourly_delta, load_slope_model, write_slope_model

QUANTILES = (("min", 0.0), ("q50", 0.5), ("q90", 0.9), ("q99", 0.99), ("max", 1.0))
DEFAULT_BINS = 2000
SUBGROUPS = ("year", "fuel_type", "company")


# -- configuration ---------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    market: Path
    units: Path
    generation: Path
    outages: Path | None = None
    out: Path = Path("results")
    mc: McConfig = field(default_factory=McConfig)
    slope: SlopeParams = field(default_factory=SlopeParams)
    fuels: FuelParams = field(default_factory=FuelParams)
    hedge_rate: float = 1.0
    sensitivity_rates: tuple = (1.0, 0.7, 0.0)
    block_mode: str = "exact"
    block_fraction: float = 1.0 / 3.0
    subgroups: tuple = SUBGROUPS
    n_bins: int = DEFAULT_BINS
    tz: str = DEFAULT_TZ
    jobs: int = 1

    def __post_init__(self):
        if not 0 <= self.hedge_rate <= 1:
            raise ConfigError("hedge_rate must lie in [0, 1]")
        if any(not 0 <= r <= 1 for r in self.sensitivity_rates):
            raise ConfigError("sensitivity_rates must lie in [0, 1]")
        if self.block_mode not in BLOCK_MODES:
            raise ConfigError(f"block_mode must be one of {BLOCK_MODES}")
        if not 0 < self.block_fraction <= 1:
            raise ConfigError("block_fraction must lie in (0, 1]")
        bad = set(self.subgroups) - set(SUBGROUPS)
        if bad:
            raise ConfigError(f"unknown subgroup key(s) {sorted(bad)}")
        if self.n_bins < 1:
            raise ConfigError("n_bins must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        try:
            hours_to_index([0]).tz_convert(self.tz)
        except Exception:
            raise ConfigError(f"unknown time zone {self.tz!r}") from None


def _float_list(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


def _str_list(s):
    return tuple(v.strip() for v in s.split(",") if v.strip())


# key -> (section, field, parser)
CONFIG_KEYS = {
    "market": (None, "market", Path),
    "units": (None, "units", Path),
    "generation": (None, "generation", Path),
    "outages": (None, "outages", Path),
    "out": (None, "out", Path),
    "hedge_rate": (None, "hedge_rate", float),
    "sensitivity_rates": (None, "sensitivity_rates", _float_list),
    "block_mode": (None, "block_mode", str),
    "block_fraction": (None, "block_fraction", float),
    "subgroups": (None, "subgroups", _str_list),
    "n_bins": (None, "n_bins", int),
    "timezone": (None, "tz", str),
    "jobs": (None, "jobs", int),
    "seed": ("mc", "seed", int),
    "iterations": ("mc", "iterations", int),
    "multiplier_sd": ("mc", "multiplier_sd", float),
    "keep_threshold": ("mc", "keep_threshold", float),
    "dispatch_epsilon": ("mc", "dispatch_epsilon", float),
    "horizon_hours": ("mc", "horizon", int),
    "overlap_hours": ("mc", "overlap", int),
    "max_breakpoints": ("slope", "max_breakpoints", int),
    "variance_target": ("slope", "variance_target", float),
    "breakpoint_jump": ("slope", "jump", int),
    "max_segments": ("slope", "max_segments", int),
    "min_obs_per_segment": ("slope", "min_obs_per_segment", int),
    "ef_gas": ("fuels", "ef_gas", float),
    "ef_hard_coal": ("fuels", "ef_hard_coal", float),
    "ef_lignite": ("fuels", "ef_lignite", float),
    "lignite_price": ("fuels", "lignite_price", float),
}
_PATH_KEYS = ("market", "units", "generation", "outages", "out")


def parse_config_text(text, base_dir=".", overrides=None) -> PipelineConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors.

    Relative paths resolve against ``base_dir``. ``overrides`` maps config
    keys to already-typed values (used for command-line flags).
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"config line {lineno}: unknown key '{key}'")
        if key in raw:
            raise ConfigError(f"config line {lineno}: duplicate key '{key}'")
        try:
            raw[key] = CONFIG_KEYS[key][2](value)
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value {value!r} for '{key}'") from None
    for key, value in (overrides or {}).items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown override '{key}'")
        if value is not None:
            raw[key] = CONFIG_KEYS[key][2](value) if isinstance(value, str) else value
    base = Path(base_dir)
    for key in _PATH_KEYS:
        if key in raw:
            p = Path(raw[key])
            raw[key] = p if p.is_absolute() else base / p
    for key in ("market", "units", "generation"):
        if key not in raw:
            raise ConfigError(f"config is missing required key '{key}'")
    top, sections = {}, {"mc": {}, "slope": {}, "fuels": {}}
    for key, value in raw.items():
        section, name, _ = CONFIG_KEYS[key]
        (sections[section] if section else top)[name] = value
    try:
        return PipelineConfig(mc=McConfig(**sections["mc"]), slope=SlopeParams(**sections["slope"]),
                              fuels=FuelParams(**sections["fuels"]), **top)
    except (TypeError, DomainError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides=None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config_text(path.read_text(), path.parent, overrides)


# -- stages --------------------------------------------------------------------------

@dataclass(frozen=True)
class Inputs:
    market: object
    units: list
    generation: object
    available: np.ndarray  # (hours, units) in unit-list order

    @property
    def scoped_available(self):
        return self.available[:, [j for j, u in enumerate(self.units) if u.in_scope]]


def ingest(cfg: PipelineConfig) -> Inputs:
    for name in ("market", "units", "generation", "outages"):
        p = getattr(cfg, name)
        if p is not None and not Path(p).is_file():
            raise ValidationError(f"input file {p} ({name}) not found")
    market = load_market(cfg.market)
    units = load_units(cfg.units)
    if not any(u.in_scope for u in units):
        raise ValidationError("unit list has no in-scope units")
    generation = load_generation(cfg.generation, units, market.hours)
    mask = load_outages(cfg.outages, units, market.hours) if cfg.outages else all_available(units, market.hours)
    check_generation_bounds(generation, units, mask)
    return Inputs(market, units, generation, availability_filter(units, mask))


def dispatch_stage(inputs: Inputs, cfg: PipelineConfig) -> pd.DataFrame:
    return run_dispatch(inputs.market, inputs.units, inputs.generation, inputs.available,
                        cfg.mc, cfg.fuels, cfg.jobs)


def slope_stage(inputs: Inputs, cfg: PipelineConfig):
    return estimate_slopes(inputs.market, cfg.slope, cfg.fuels)


def incentives_stage(inputs: Inputs, model, cfg: PipelineConfig, rate=None) -> pd.DataFrame:
    delta = hourly_delta(model, inputs.market)
    r = cfg.hedge_rate if rate is None else rate
    return build_incentive_panel(inputs.market, inputs.units, inputs.generation, inputs.available,
                                 delta, r, cfg.fuels, cfg.tz)


def join_panels(dispatch: pd.DataFrame, incentives: pd.DataFrame) -> pd.DataFrame:
    """Row-aligned join of the dispatch and incentive panels."""
    if len(dispatch) != len(incentives) or not (
            np.array_equal(dispatch["hour"].to_numpy(), incentives["hour"].to_numpy())
            and np.array_equal(dispatch["unit_id"].to_numpy(), incentives["unit_id"].to_numpy())):
        raise AlignmentError("dispatch and incentive panels cover different unit-hours")
    cols = ["delta", "exposure_mw", "margin", "pi_w", "pi_p"]
    return pd.concat([dispatch.reset_index(drop=True), incentives[cols].reset_index(drop=True)], axis=1)


def _fit_entry(regime, group, spec, fit):
    head = {"regime": regime, "group": group, "spec": spec}
    if isinstance(fit, Skipped):
        return head | fit.as_dict()
    return head | {"skipped": False} | fit.as_dict()


def _block_columns(panel: pd.DataFrame, cfg: PipelineConfig):
    q = panel["capacity"].to_numpy() * cfg.block_fraction
    args = (panel["delta"].to_numpy(), panel["exposure_mw"].to_numpy(), panel["margin"].to_numpy(), q)
    return panel.assign(
        block_w=block_net_profit(*args, mode=cfg.block_mode, direction="withhold"),
        block_p=block_net_profit(*args, mode=cfg.block_mode, direction="pushin"),
    )


def fit_stage(joined: pd.DataFrame, inputs: Inputs, cfg: PipelineConfig, sensitivity=None):
    """Every model of the run as a list of fits.json entries plus the main fits.

    ``sensitivity`` maps hedge rates to incentive panels; rates equal to the
    main rate reuse the main fits.
    """
    panel = _block_columns(annotate(joined, inputs.units, cfg.tz), cfg)
    w, p = regime_split_fit(panel)
    entries = [_fit_entry("withhold", "all", "per_mw", w), _fit_entry("pushin", "all", "per_mw", p)]
    bw, bp = regime_split_fit(panel, "block_w", "block_p")
    entries += [_fit_entry("withhold", "all", "block", bw), _fit_entry("pushin", "all", "block", bp)]
    for key in cfg.subgroups:
        for value, sub in panel.groupby(key, sort=True):
            gw, gp = regime_split_fit(sub)
            group = f"{key}={value}"
            entries += [_fit_entry("withhold", group, "per_mw", gw), _fit_entry("pushin", group, "per_mw", gp)]
    for rate, inc in sorted((sensitivity or {}).items(), reverse=True):
        if rate == cfg.hedge_rate:
            sw, sp = w, p
        else:
            sw, sp = regime_split_fit(join_panels(joined, inc))
        group = f"hedge_rate={rate!r}"
        entries += [_fit_entry("withhold", group, "per_mw", sw), _fit_entry("pushin", group, "per_mw", sp)]
    return entries, (w, p)


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


# -- report tables -----------------------------------------------------------------------

def _quantile_row(x):
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return {name: None for name, _ in QUANTILES} | {"n": 0}
    q = np.quantile(x, [p for _, p in QUANTILES])
    return {name: float(v) for (name, _), v in zip(QUANTILES, q)} | {"n": int(len(x))}


def summary_quantiles(panel: pd.DataFrame, z=None) -> dict:
    """min/q50/q90/q99/max of both net profits.

    The full-panel variant uses every row. With ``z`` (row-aligned benchmark
    states) an opportunity-conditioned variant is added: withholding profit
    where the benchmark runs the unit, push-in profit where it does not.
    """
    if len(panel) == 0:
        raise DomainError("empty incentive panel")
    out = {"full": {"pi_w": _quantile_row(panel["pi_w"]), "pi_p": _quantile_row(panel["pi_p"])}}
    if z is not None:
        z = np.asarray(z, dtype=float)
        out["opportunity"] = {"pi_w": _quantile_row(panel["pi_w"].to_numpy()[z == 1]),
                              "pi_p": _quantile_row(panel["pi_p"].to_numpy()[z == 0])}
    return out


def bin_curve(x, y, fit, n_bins=DEFAULT_BINS) -> pd.DataFrame:
    """Equal-count bins along the predictor: observed frequency against prediction."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if n_bins < 1:
        raise DomainError("n_bins must be >= 1")
    if n_bins > len(x):
        raise InfeasibleError(f"{n_bins} bins requested for {len(x)} observations")
    order = np.argsort(x, kind="stable")
    prob = predict_prob(fit, x) if fit is not None else np.full(len(x), np.nan)
    rows = []
    for b, idx in enumerate(np.array_split(order, n_bins)):
        rows.append((b, len(idx), x[idx].mean(), y[idx].mean(), np.mean(prob[idx])))
    return pd.DataFrame(rows, columns=["bin", "n", "pi_mean", "observed_rate", "predicted_rate"])


def write_bin_curve(frame: pd.DataFrame, path):
    rows = ([str(r.bin), str(r.n), format_float(r.pi_mean), format_float(r.observed_rate),
             format_float(r.predicted_rate)] for r in frame.itertuples())
    write_rows(path, tuple(frame.columns), rows)


def _impact_side(sub, fit, size_col, sign):
    if not isinstance(fit, LogitFit) or len(sub) == 0:
        return None, None
    mw = predict_prob(fit, sub["pi"].to_numpy()) * sub[size_col].to_numpy()
    per_hour = pd.DataFrame({"hour": sub["hour"].to_numpy(), "mw": mw, "delta": sub["delta"].to_numpy()})
    per_hour = per_hour.groupby("hour", sort=True).agg(mw=("mw", "sum"), delta=("delta", "first"))
    dp = sign * per_hour["delta"].to_numpy() * per_hour["mw"].to_numpy()
    return float(mw.sum()), dp


def expected_impact(joined: pd.DataFrame, fits, market, tz=DEFAULT_TZ) -> list:
    """Expected withheld and pushed-in energy and the implied hourly price changes.

    ``joined`` must carry hour, z, pi_w, pi_p, delta, capacity and min_load.
    Withheld volume is P(withhold) * capacity over z = 1 unit-hours, pushed-in
    volume P(push-in) * min load over z = 0 unit-hours. Volumes are reported
    against total demand and against demand in hours with at least one
    eligible unit-hour. Price changes are averaged over hours with at least one
    eligible unit-hour of the respective regime.
    """
    w_fit, p_fit = fits
    years_all = np.asarray(hours_to_index(market.hours).tz_convert(tz).year)
    demand = np.asarray(market.demand, dtype=float)
    hour_pos = np.asarray(joined["hour"].to_numpy() - market.hours[0], dtype=np.int64)
    years = years_all[hour_pos]
    eligible = np.zeros(len(market), dtype=bool)
    eligible[hour_pos[joined["z"].notna().to_numpy()]] = True

    rows = []
    for label in [*sorted(set(years_all.tolist())), "all"]:
        in_year = np.ones(len(joined), dtype=bool) if label == "all" else years == label
        hrs = np.ones(len(market), dtype=bool) if label == "all" else years_all == label
        sub = joined[in_year]
        w = sub[sub["z"] == 1].rename(columns={"pi_w": "pi"})
        p = sub[sub["z"] == 0].rename(columns={"pi_p": "pi"})
        vol_w, dp_w = _impact_side(w, w_fit, "capacity", 1.0)
        vol_p, dp_p = _impact_side(p, p_fit, "min_load", -1.0)
        load_total = float(demand[hrs].sum())
        load_elig = float(demand[hrs & eligible].sum())

        def share(v, d):
            return None if v is None or d <= 0 else v / d

        rows.append({
            "period": str(label),
            "load_total_mwh": load_total,
            "load_eligible_mwh": load_elig,
            "withheld_mwh": vol_w,
            "withheld_share_total_load": share(vol_w, load_total),
            "withheld_share_eligible_load": share(vol_w, load_elig),
            "withhold_price_change_mean": None if dp_w is None or len(dp_w) == 0 else float(dp_w.mean()),
            "withhold_price_change_max": None if dp_w is None or len(dp_w) == 0 else float(dp_w.max()),
            "pushed_mwh": vol_p,
            "pushed_share_total_load": share(vol_p, load_total),
            "pushed_share_eligible_load": share(vol_p, load_elig),
            "pushin_price_change_mean": None if dp_p is None or len(dp_p) == 0 else float(dp_p.mean()),
            "pushin_price_change_min": None if dp_p is None or len(dp_p) == 0 else float(dp_p.min()),
        })
    return rows


def deviation_shares(panel: pd.DataFrame, by=None) -> dict:
    """Shares of y = -1 / 0 / +1 among unit-hours with a defined benchmark."""
    def one(frame):
        y = frame["y"].dropna().to_numpy()
        n = len(y)
        return {"n_defined": int(n), "n_excluded": int(len(frame) - n),
                "missing": float(np.mean(y == -1)) if n else None,
                "agree": float(np.mean(y == 0)) if n else None,
                "surplus": float(np.mean(y == 1)) if n else None}
    out = {"all": one(panel)}
    if by is not None:
        out |= {f"{by}={k}": one(g) for k, g in panel.groupby(by, sort=True)}
    return out


def report_stage(joined: pd.DataFrame, inputs: Inputs, main_fits, cfg: PipelineConfig):
    panel = annotate(joined, inputs.units, cfg.tz)
    report = {
        "net_profit_quantiles": summary_quantiles(panel, panel["z"].to_numpy()),
        "share_positive": {
            "pi_w_full": float(np.mean(panel["pi_w"] > 0)),
            "pi_p_full": float(np.mean(panel["pi_p"] > 0)),
        },
        "deviation_shares": deviation_shares(panel, "fuel_type"),
        "expected_impact": expected_impact(panel, main_fits, inputs.market, cfg.tz),
    }
    curves = {}
    for regime, fit in zip(("withhold", "pushin"), main_fits):
        x, y = regime_data(panel, regime)
        if len(x) == 0:
            continue
        nb = min(cfg.n_bins, len(x))
        curves[regime] = bin_curve(x, y, fit if isinstance(fit, LogitFit) else None, nb)
        report.setdefault("bin_curves", {})[regime] = {"file": f"bin_curve_{regime}.csv", "n_bins": nb}
    return report, curves


# -- orchestration ------------------------------------------------------------------------

STAGES = ("ingest", "dispatch", "slope", "incentives", "fit", "report")
# direct upstream stages whose outputs each stage reads
DEPENDS = {
    "ingest": (),
    "dispatch": ("ingest",),
    "slope": ("ingest",),
    "incentives": ("slope",),
    "fit": ("dispatch", "incentives"),
    "report": ("fit",),
}


def downstream(name):
    """Stages whose outputs are stale once ``name`` is recomputed."""
    out, grew = set(), True
    while grew:
        grew = False
        for s, deps in DEPENDS.items():
            if s not in out and (name in deps or out & set(deps)):
                out.add(s)
                grew = True
    return out


@dataclass
class Bundle:
    inputs: Inputs | None = None
    dispatch: pd.DataFrame | None = None
    slope_model: object = None
    incentives: pd.DataFrame | None = None
    fits: list = field(default_factory=list)
    main_fits: tuple = ()
    report: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    completed: list = field(default_factory=list)

    @property
    def diagnostics(self):
        """Reasons why either main per-MW regime fit was skipped."""
        return [f"{e['regime']}: {e['reason']}" for e in self.fits
                if e["group"] == "all" and e["spec"] == "per_mw" and e.get("skipped")]


def _read_manifest(out):
    path = Path(out) / "manifest.json"
    if not path.is_file():
        return []
    try:
        return [s for s in json.loads(path.read_text()).get("completed_stages", []) if s in STAGES]
    except (ValueError, AttributeError):
        return []


def write_manifest(out, completed, failed=None, error=None):
    completed = [s for s in STAGES if s in completed]
    status = "complete" if completed == list(STAGES) and failed is None else "incomplete"
    dump_json({"status": status, "completed_stages": completed,
               "failed_stage": failed, "error": error}, Path(out) / "manifest.json")


class _Tracker:
    """Wraps stage errors with the stage name and keeps manifest.json current.

    Finishing a computing stage invalidates every stage that reads its
    outputs, directly or indirectly. Re-reading the inputs leaves cached
    outputs valid.
    """

    def __init__(self, bundle, out):
        self.bundle = bundle
        self.out = out
        self.done = _read_manifest(out) if out is not None else []

    @contextmanager
    def stage(self, name, record=True):
        try:
            yield
        except StageError:
            raise
        except (MarketPowerError, ValueError, OSError, KeyError) as exc:
            if self.out is not None:
                stale = downstream(name) | {name}
                write_manifest(self.out, [s for s in self.done if s not in stale],
                               failed=name, error=str(exc))
            raise StageError(name, exc) from exc
        if not record:
            return
        self.bundle.completed.append(name)
        keep = self.done if name == "ingest" else [s for s in self.done if s not in downstream(name)]
        self.done = sorted(set(keep) | {name}, key=STAGES.index)
        if self.out is not None:
            write_manifest(self.out, self.done)


def _fit_from_entry(entry):
    if entry.get("skipped"):
        return Skipped(entry.get("reason", ""), entry.get("n", 0))
    nan = float("nan")
    vals = {k: (nan if entry.get(k) is None else entry[k]) for k in
            ("beta0", "beta1", "se0", "se1", "ll", "ll0", "mcfadden_r2", "grad_norm")}
    return LogitFit(n=entry["n"], converged=entry["converged"], iterations=entry["iterations"],
                    cov=np.full((2, 2), nan), **vals)


def load_fits(path):
    """(entries, (withhold fit, push-in fit)) from a fits.json file."""
    try:
        entries = json.loads(Path(path).read_text())["models"]
    except (ValueError, KeyError) as exc:
        raise ValidationError(f"{path}: not a fits file ({exc})") from None
    main = {e["regime"]: e for e in entries if e["group"] == "all" and e["spec"] == "per_mw"}
    if set(main) != {"withhold", "pushin"}:
        raise ValidationError(f"{path}: main regime fits missing")
    return entries, (_fit_from_entry(main["withhold"]), _fit_from_entry(main["pushin"]))


def run_stages(cfg: PipelineConfig, stages=STAGES, inputs: Inputs | None = None, write=True) -> Bundle:
    """Run the requested stages; upstream results not recomputed come from ``cfg.out``.

    Ingest always runs (or ``inputs`` is used as given). With ``write`` every
    finished stage writes its outputs and updates manifest.json.
    """
    stages = set(stages)
    unknown = stages - set(STAGES)
    if unknown:
        raise ConfigError(f"unknown stage(s) {sorted(unknown)}")
    out = Path(cfg.out) if write else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    last = max(STAGES.index(s) for s in stages | {"ingest"})
    b = Bundle()
    t = _Tracker(b, out)

    def cached(name, path_names):
        if out is None:
            raise ConfigError(f"stage '{name}' output is not available in memory")
        for p in path_names:
            if not (out / p).is_file():
                raise ValidationError(f"{out / p} not found; run the '{name}' stage first")

    with t.stage("ingest"):
        b.inputs = inputs if inputs is not None else ingest(cfg)
        if out is not None:
            dump_json(ingest_summary(b.inputs), out / "ingest_summary.json")

    if last >= 1:
        if "dispatch" in stages:
            with t.stage("dispatch"):
                b.dispatch = dispatch_stage(b.inputs, cfg)
                if out is not None:
                    write_dispatch_panel(b.dispatch, out / "dispatch_panel.csv")
        elif last >= 4:
            with t.stage("dispatch", record=False):
                cached("dispatch", ["dispatch_panel.csv"])
                b.dispatch = load_dispatch_panel(out / "dispatch_panel.csv")

    if "slope" in stages or last >= 3:
        if "slope" in stages:
            with t.stage("slope"):
                b.slope_model = slope_stage(b.inputs, cfg)
                if out is not None:
                    write_slope_model(b.slope_model, out / "regimes.csv", out / "supply_fits.csv")
        else:
            with t.stage("slope", record=False):
                cached("slope", ["regimes.csv", "supply_fits.csv"])
                b.slope_model = load_slope_model(out / "regimes.csv", out / "supply_fits.csv",
                                                 b.inputs.market.hours)

    if last >= 3:
        if "incentives" in stages:
            with t.stage("incentives"):
                b.incentives = incentives_stage(b.inputs, b.slope_model, cfg)
                if out is not None:
                    write_incentive_panel(b.incentives, out / "incentive_panel.csv")
        elif last >= 4:
            with t.stage("incentives", record=False):
                cached("incentives", ["incentive_panel.csv"])
                b.incentives = load_incentive_panel(out / "incentive_panel.csv")

    if last >= 4:
        joined = None
        if "fit" in stages:
            with t.stage("fit"):
                joined = join_panels(b.dispatch, b.incentives)
                sens = {r: (b.incentives if r == cfg.hedge_rate
                            else incentives_stage(b.inputs, b.slope_model, cfg, r))
                        for r in cfg.sensitivity_rates}
                b.fits, b.main_fits = fit_stage(joined, b.inputs, cfg, sens)
                if out is not None:
                    dump_json({"models": b.fits}, out / "fits.json")
        elif last >= 5:
            with t.stage("fit", record=False):
                cached("fit", ["fits.json"])
                b.fits, b.main_fits = load_fits(out / "fits.json")

    if "report" in stages:
        with t.stage("report"):
            if joined is None:
                joined = join_panels(b.dispatch, b.incentives)
            b.report, b.curves = report_stage(joined, b.inputs, b.main_fits, cfg)
            if out is not None:
                dump_json(b.report, out / "report.json")
                for regime, frame in b.curves.items():
                    write_bin_curve(frame, out / f"bin_curve_{regime}.csv")
    return b


def run_pipeline(cfg: PipelineConfig, inputs: Inputs | None = None, write=True) -> Bundle:
    """Every stage in order; ``inputs`` bypasses file ingest."""
    return run_stages(cfg, STAGES, inputs, write)


def ingest_summary(inputs: Inputs) -> dict:
    m = inputs.market
    return {
        "n_hours": len(m),
        "start": format_hours([m.hours[0]])[0],
        "end": format_hours([m.hours[-1]])[0],
        "n_units": len(inputs.units),
        "n_in_scope": sum(u.in_scope for u in inputs.units),
        "available_unit_hours": int(inputs.scoped_available.sum()),
        "companies": sorted({u.company_id for u in inputs.units}),
    }


def with_overrides(cfg: PipelineConfig, seed=None, jobs=None, hedge_rate=None, out=None) -> PipelineConfig:
    if seed is not None:
        cfg = replace(cfg, mc=replace(cfg.mc, seed=int(seed)))
    if jobs is not None:
        cfg = replace(cfg, jobs=int(jobs))
    if hedge_rate is not None:
        cfg = replace(cfg, hedge_rate=float(hedge_rate))
    if out is not None:
        cfg = replace(cfg, out=Path(out))
    return cfg
