"""Synthetic markets with planted strategic deviations and known ground truth.

The generator builds fuel prices with planted regime breaks, a residual load
process, spot prices from a planted piecewise supply curve, a thermal fleet
and its competitive dispatch, then flips dispatch states with logistic
probabilities in the net profit of deviating.

Each company owns one out-of-scope balancing unit whose output tops the
company total up to an exogenous target. Company generation, and hence net
exposure, is then unaffected by the planted deviations, and the net profit the
pipeline recomputes from the exported files is the same one the deviations
were drawn from. The logit is correctly specified by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit
from scipy.stats import norm

from . import kernels
from .dispatch import generation_from_state
from .errors import ConfigError
from .fuels import FuelParams, unit_variable_cost, fuel_series, carbon_series
from .hedging import DEFAULT_TZ, hedge_book, net_exposure, margin, net_profit_pushin, net_profit_withhold
from .market_data import (
    MarketSeries,
    ObservedGeneration,
    OutageMask,
    UnitSpec,
    residual_load,
    write_generation,
    write_market,
    write_outages,
    write_units,
)
from .monte_carlo import McConfig, _unit_key, discretize, simulate_fleet
from .supply_curve import SlopeParams, estimate_slopes, hourly_delta

FLEET_TEMPLATES = {
    # fuel: (efficiency range, min-load share, depreciation EUR/MW, cold-start MWh_th/MW)
    "lignite": ((0.35, 0.40), 0.40, 40.0, 6.0),
    "hard_coal": ((0.38, 0.44), 0.35, 30.0, 5.0),
    "ccgt": ((0.52, 0.58), 0.30, 20.0, 3.0),
    "gas_other": ((0.33, 0.40), 0.25, 10.0, 1.5),
}


@dataclass(frozen=True)
class SynthConfig:
    n_units: int = 40
    n_companies: int = 6
    sample_hours: int = 8760
    start: str = "2021-01-01T00:00:00Z"
    # fuel regimes: plateaus change at these hours
    regime_hours: tuple = (1500, 3600, 5000, 7000)
    gas_levels: tuple = (18.0, 25.0, 45.0, 80.0, 60.0)
    coal_levels: tuple = (8.0, 10.0, 14.0, 25.0, 18.0)
    carbon_levels: tuple = (30.0, 40.0, 55.0, 75.0, 80.0)
    fuel_noise_sd: float = 1.0
    # supply curve: knots in MW of residual load and slopes in EUR/MWh per MW;
    # slopes scale with each regime's price level
    supply_knots: tuple = (45000.0, 58000.0)
    supply_slopes: tuple = (0.0008, 0.002, 0.006)
    price_noise_sd: float = 3.0
    load_mean: float = 45000.0
    load_seasonal_amp: float = 7000.0
    load_daily_amp: float = 6000.0
    load_noise_sd: float = 3000.0
    vre_mean: float = 15000.0
    capacity_range: tuple = (150.0, 900.0)
    outage_spells: float = 2.0
    portfolio_amp: tuple = (500.0, 2500.0)
    portfolio_noise_sd: float = 300.0
    hedge_rate: float = 1.0
    withhold_beta: tuple = (-1.166, 0.0102)
    pushin_beta: tuple = (-0.9327, 0.0034)
    # AR(1) coefficient of the latent deviation draws; 0 gives independent draws
    serial_correlation: float = 0.0
    seed: int = 0
    # estimation settings the pipeline will use on this market
    mc: McConfig = field(default_factory=lambda: McConfig(iterations=200))
    slope: SlopeParams = field(default_factory=SlopeParams)
    fuels: FuelParams = field(default_factory=FuelParams)
    tz: str = DEFAULT_TZ

    def __post_init__(self):
        if min(self.n_units, self.n_companies, self.sample_hours) < 1:
            raise ConfigError("unit, company and hour counts must be >= 1")
        n_reg = len(self.regime_hours) + 1
        for name in ("gas_levels", "coal_levels", "carbon_levels"):
            if len(getattr(self, name)) != n_reg:
                raise ConfigError(f"{name} needs {n_reg} levels")
        if list(self.regime_hours) != sorted(self.regime_hours) or any(
                not 0 < h < self.sample_hours for h in self.regime_hours):
            raise ConfigError("regime_hours must be increasing and inside the sample")
        if len(self.supply_slopes) != len(self.supply_knots) + 1:
            raise ConfigError("need one more supply slope than knots")
        if any(s < 0 for s in self.supply_slopes):
            raise ConfigError("supply slopes must be non-negative")
        for b in (self.withhold_beta, self.pushin_beta):
            if np.isnan(b[0]) or not np.isfinite(b[1]) or b[0] == np.inf:
                raise ConfigError("planted coefficients must be finite (beta0 may be -inf)")
        if not 0 <= self.hedge_rate <= 1:
            raise ConfigError("hedge_rate must lie in [0, 1]")
        if not 0 <= self.serial_correlation < 1:
            raise ConfigError("serial_correlation must lie in [0, 1)")
        lo, hi = self.capacity_range
        if not 0 < lo <= hi:
            raise ConfigError("capacity_range must be positive and ordered")


@dataclass
class SynthMarket:
    market: MarketSeries
    units: list
    generation: ObservedGeneration
    outages: OutageMask
    truth: dict


def _rng(cfg, stream):
    return np.random.default_rng([int(cfg.seed) & 0xFFFFFFFF, stream])


def _market(cfg: SynthConfig) -> MarketSeries:
    n = cfg.sample_hours
    rng = _rng(cfg, 1)
    start = int(np.datetime64(cfg.start.rstrip("Z"), "h").astype(np.int64))
    hours = np.arange(start, start + n, dtype=np.int64)
    reg = np.searchsorted(np.asarray(cfg.regime_hours), np.arange(n), side="right")
    gas = np.maximum(np.asarray(cfg.gas_levels)[reg] + rng.normal(0, cfg.fuel_noise_sd, n), 0.0)
    coal = np.maximum(np.asarray(cfg.coal_levels)[reg] + rng.normal(0, cfg.fuel_noise_sd, n), 0.0)
    carbon = np.asarray(cfg.carbon_levels, dtype=float)[reg]

    t = np.arange(n)
    hod = (hours % 24 + 1) % 24  # roughly local hour
    daily = np.sin(np.pi * np.clip(hod - 6, 0, 16) / 16)
    demand = (cfg.load_mean + cfg.vre_mean
              + cfg.load_seasonal_amp * np.cos(2 * np.pi * t / 8760.0)
              + cfg.load_daily_amp * daily
              + rng.normal(0, cfg.load_noise_sd, n))
    wind = cfg.vre_mean * 0.7 * np.exp(lfilter([0.3], [1, -0.97], rng.normal(0, 0.6, n)) / 2)
    solar = cfg.vre_mean * 0.3 * 2 * np.maximum(np.sin(np.pi * (hod - 6) / 12), 0)
    vre = np.maximum(wind + solar, 0.0)
    demand = np.maximum(demand, vre + 1000.0)
    load = demand - vre

    gas_adj = np.asarray(cfg.gas_levels) + cfg.fuels.ef_gas * np.asarray(cfg.carbon_levels)
    anchor = gas_adj / 0.62  # price at the first knot sits just below CCGT cost
    scale = anchor / anchor[0]
    price = np.empty(n)
    for r in range(len(anchor)):
        m = reg == r
        price[m] = _planted_curve(load[m], cfg.supply_knots, np.asarray(cfg.supply_slopes) * scale[r], anchor[r])
    price += rng.normal(0, cfg.price_noise_sd, n)
    return MarketSeries(hours=hours, spot_price=price, demand=demand, vre_generation=vre,
                        gas_price=gas, coal_price=coal, carbon_price=carbon)


def _planted_curve(load, knots, slopes, level):
    """Continuous piecewise-linear curve with value ``level`` at the first knot."""
    knots = np.asarray(knots, dtype=float)
    out = level + slopes[0] * (np.minimum(load, knots[0]) - knots[0])
    for j in range(1, len(slopes)):
        lo = knots[j - 1]
        hi = knots[j] if j < len(knots) else np.inf
        out = out + slopes[j] * (np.clip(load, lo, hi) - lo)
    return out


def _units(cfg: SynthConfig) -> list:
    rng = _rng(cfg, 2)
    fuels = list(FLEET_TEMPLATES)
    units = []
    for i in range(cfg.n_units):
        fuel = fuels[i % len(fuels)]
        (e_lo, e_hi), share, dep, qcold = FLEET_TEMPLATES[fuel]
        cap = round(float(rng.uniform(*cfg.capacity_range)), 1)
        units.append(UnitSpec(
            unit_id=f"U{i:03d}", company_id=f"C{i % cfg.n_companies:02d}", fuel_type=fuel,
            capacity=cap, min_load=round(cap * share, 1),
            efficiency=round(float(rng.uniform(e_lo, e_hi)), 4),
            startup_depreciation=dep, cold_start_fuel=qcold, cold_start_factor=1.0,
        ))
    return units


def _outages(cfg, units, n) -> np.ndarray:
    rng = _rng(cfg, 3)
    avail = np.ones((n, len(units)), dtype=bool)
    for j in range(len(units)):
        for _ in range(rng.poisson(cfg.outage_spells)):
            a = int(rng.integers(0, n))
            avail[a:a + int(rng.integers(24, 337)), j] = False
    return avail


def _uniforms(cfg, unit_id, n) -> np.ndarray:
    # counter word 2 separates these draws from the Monte Carlo multiplier streams
    key = np.array([int(cfg.seed) & 0xFFFFFFFFFFFFFFFF, _unit_key(unit_id)], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key, counter=np.array([0, 0, 1, 0], dtype=np.uint64)))
    if cfg.serial_correlation == 0:
        return gen.random(n)
    rho = cfg.serial_correlation
    e = lfilter([np.sqrt(1 - rho * rho)], [1, -rho], gen.standard_normal(n))
    return norm.cdf(e)


def plant_deviations(z, pi_w, pi_p, uniforms, withhold_beta, pushin_beta):
    """Return (withheld, pushed) boolean masks.

    A unit-hour with z = 1 is withheld when its uniform falls below the
    withholding probability, one with z = 0 is pushed in likewise; excluded
    hours (z NaN) are never touched.
    """
    z = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore"):
        pw = expit(withhold_beta[0] + withhold_beta[1] * np.asarray(pi_w, dtype=float))
        pp = expit(pushin_beta[0] + pushin_beta[1] * np.asarray(pi_p, dtype=float))
    u = np.asarray(uniforms, dtype=float)
    withheld = (z == 1) & (u < pw)
    pushed = (z == 0) & (u < pp)
    return withheld, pushed


def generate_market(cfg: SynthConfig = SynthConfig(), jobs=1) -> SynthMarket:
    market = _market(cfg)
    n = len(market)
    units = _units(cfg)
    avail = _outages(cfg, units, n)

    # nominal competitive dispatch
    nominal = np.zeros((n, len(units)))
    nominal_state = np.zeros((n, len(units)), dtype=np.uint8)
    cvar = np.zeros((n, len(units)))
    for j, u in enumerate(units):
        c = unit_variable_cost(u, market, cfg.fuels)
        th = fuel_series(u.fuel_type, market, cfg.fuels) + carbon_series(u.fuel_type, market, cfg.fuels)
        cs = u.capacity * (u.startup_depreciation + u.cold_start_fuel * u.cold_start_factor * th)
        st = kernels.chain_dispatch(np.ascontiguousarray(market.spot_price), np.ascontiguousarray(c),
                                    np.ascontiguousarray(cs), u.capacity, u.min_load, False,
                                    cfg.mc.horizon, cfg.mc.overlap)
        nominal_state[:, j] = st
        nominal[:, j] = generation_from_state(st, market.spot_price, c, u.capacity, u.min_load)
        cvar[:, j] = c

    # the benchmark the pipeline will compute
    d_bar = simulate_fleet(units, market, cfg.mc, cfg.fuels, jobs)
    z = discretize(d_bar, cfg.mc.keep_threshold)
    delta = hourly_delta(estimate_slopes(market, cfg.slope, cfg.fuels), market)

    # exogenous company totals
    rng = _rng(cfg, 4)
    companies = sorted({u.company_id for u in units})
    load = residual_load(market)
    lz = (load - load.mean()) / load.std()
    target = np.zeros((n, len(companies)))
    for k, c in enumerate(companies):
        fleet = sum(u.capacity for u in units if u.company_id == c)
        amp = rng.uniform(*cfg.portfolio_amp)
        target[:, k] = fleet + 4 * amp + 1000.0 + amp * lz + rng.normal(0, cfg.portfolio_noise_sd, n)
        target[:, k] = np.maximum(target[:, k], fleet + 100.0)
    hedged, _ = hedge_book(target, market.hours, cfg.hedge_rate, cfg.tz)
    exposure = net_exposure(target, hedged)

    observed = np.zeros((n, len(units)))
    pi_w = np.zeros((n, len(units)))
    pi_p = np.zeros((n, len(units)))
    withheld = np.zeros((n, len(units)), dtype=bool)
    pushed = np.zeros((n, len(units)), dtype=bool)
    for j, u in enumerate(units):
        e = exposure[:, companies.index(u.company_id)]
        m = margin(market.spot_price, cvar[:, j])
        pi_w[:, j] = net_profit_withhold(delta, e, m)
        pi_p[:, j] = net_profit_pushin(delta, e, m)
        zj = np.where(avail[:, j], z[:, j], np.nan)
        w, p = plant_deviations(zj, pi_w[:, j], pi_p[:, j], _uniforms(cfg, u.unit_id, n),
                                cfg.withhold_beta, cfg.pushin_beta)
        withheld[:, j], pushed[:, j] = w, p
        obs = nominal[:, j].copy()
        obs[zj == 1] = np.where(nominal_state[zj == 1, j] == 1, nominal[zj == 1, j], u.min_load)
        obs[zj == 0] = 0.0
        obs[w] = 0.0
        obs[p] = u.min_load
        obs[~avail[:, j]] = 0.0
        observed[:, j] = obs

    balancing = []
    bal_cols = []
    for k, c in enumerate(companies):
        own = [j for j, u in enumerate(units) if u.company_id == c]
        bal_cols.append(target[:, k] - observed[:, own].sum(axis=1))
        balancing.append(UnitSpec(
            unit_id=f"{c}_portfolio", company_id=c, fuel_type="other",
            capacity=float(np.ceil(bal_cols[-1].max())), min_load=float("nan"),
            efficiency=float("nan"), startup_depreciation=float("nan"),
            cold_start_fuel=float("nan"), cold_start_factor=float("nan"), in_scope=False,
        ))
    all_units = units + balancing
    mw = np.column_stack([observed] + bal_cols)
    ids = tuple(u.unit_id for u in all_units)
    generation = ObservedGeneration(np.asarray(market.hours), ids, mw)
    outages = OutageMask(np.asarray(market.hours), ids,
                         np.column_stack([avail, np.ones((n, len(balancing)), dtype=bool)]))

    cap = np.array([u.capacity for u in units])
    gmin = np.array([u.min_load for u in units])
    defined = avail & ~np.isnan(z)
    truth = {
        "seed": cfg.seed,
        "regime_hours": list(cfg.regime_hours),
        "supply_knots": list(cfg.supply_knots),
        "supply_slopes": list(cfg.supply_slopes),
        "hedge_rate": cfg.hedge_rate,
        "withhold_beta": list(cfg.withhold_beta),
        "pushin_beta": list(cfg.pushin_beta),
        "n_withheld": int(withheld.sum()),
        "n_pushed": int(pushed.sum()),
        "withheld_mw": float((withheld * cap).sum()),
        "pushed_mw": float((pushed * gmin).sum()),
        "n_defined": int(defined.sum()),
        "n_available": int(avail.sum()),
        "z_agreement": float(np.mean((z == nominal_state)[defined])) if defined.any() else 1.0,
        # arrays, kept out of the JSON export
        "_z": z,
        "_nominal_state": nominal_state,
        "_withheld": withheld,
        "_pushed": pushed,
        "_pi_w": pi_w,
        "_pi_p": pi_p,
        "_delta": delta,
        "_available": avail,
    }
    return SynthMarket(market, all_units, generation, outages, truth)


def write_synthetic(synth: SynthMarket, out_dir, cfg: SynthConfig | None = None):
    """Export in the ingest schemas plus ground_truth.json and a pipeline config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_market(synth.market, out / "market.csv")
    write_units(synth.units, out / "units.csv")
    write_generation(synth.generation, out / "generation.csv")
    write_outages(synth.outages, out / "outages.csv")
    public = {k: v for k, v in synth.truth.items() if not k.startswith("_")}
    (out / "ground_truth.json").write_text(json.dumps(public, indent=2, sort_keys=True) + "\n")
    if cfg is not None:
        lines = [
            "# pipeline settings matching the synthetic generator",
            "market = market.csv",
            "units = units.csv",
            "generation = generation.csv",
            "outages = outages.csv",
            "out = results",
            f"seed = {cfg.mc.seed}",
            f"iterations = {cfg.mc.iterations}",
            f"multiplier_sd = {cfg.mc.multiplier_sd!r}",
            f"keep_threshold = {cfg.mc.keep_threshold!r}",
            f"max_breakpoints = {cfg.slope.max_breakpoints}",
            f"variance_target = {cfg.slope.variance_target!r}",
            f"breakpoint_jump = {cfg.slope.jump}",
            f"max_segments = {cfg.slope.max_segments}",
            f"hedge_rate = {cfg.hedge_rate!r}",
            f"timezone = {cfg.tz}",
        ]
        (out / "pipeline.cfg").write_text("\n".join(lines) + "\n")
    return out


def with_hours(cfg: SynthConfig, hours: int) -> SynthConfig:
    """Shorten (or lengthen) the sample, dropping regime changes beyond its end."""
    cuts = tuple(h for h in cfg.regime_hours if h < hours)
    k = len(cuts) + 1
    return replace(cfg, sample_hours=hours, regime_hours=cuts, gas_levels=cfg.gas_levels[:k],
                   coal_levels=cfg.coal_levels[:k], carbon_levels=cfg.carbon_levels[:k])
