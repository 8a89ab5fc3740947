import numpy as np
import pandas as pd
import pytest

from conftest import make_generation, make_market, make_units
from oracles import hedge_neutral_means
from marketpower.errors import DomainError
from marketpower.hedging import (
    block_net_profit,
    build_incentive_panel,
    hedge_book,
    hedged_quantity,
    load_incentive_panel,
    margin,
    month_key,
    net_exposure,
    net_profit_pushin,
    net_profit_withhold,
    peak_class,
    write_incentive_panel,
)
from marketpower.market_data import UnitSpec


def _hour(ts):
    return int(pd.Timestamp(ts).tz_convert("UTC").value // 3_600_000_000_000)


@pytest.mark.parametrize("local,on", [
    ("2021-06-08 09:00", True),   # Tuesday
    ("2021-06-08 20:00", False),
    ("2021-06-08 08:00", True),
    ("2021-06-12 12:00", False),  # Saturday
    ("2021-01-12 19:00", True),   # winter time
])
def test_peak_class(local, on):
    h = _hour(pd.Timestamp(local, tz="Europe/Berlin"))
    assert peak_class(h) is on


def _month_hours():
    start = _hour(pd.Timestamp("2021-03-01 00:00", tz="Europe/Berlin"))
    hours = np.arange(start, start + 24 * 31 - 1)
    return hours


def test_hedged_quantity_constant():
    hours = _month_hours()
    g = np.full(len(hours), 1000.0)
    assert hedged_quantity(g, hours, 202103, True, 1.0) == pytest.approx(1000)
    assert hedged_quantity(g, hours, 202103, False, 0.7) == pytest.approx(700)


def test_hedged_quantity_alternating():
    hours = _month_hours()
    on = peak_class(hours)
    g = np.zeros(len(hours))
    idx = np.flatnonzero(on)
    g[idx[::2]] = 2000.0
    assert hedged_quantity(g, hours, 202103, True, 1.0) == pytest.approx(1000)


def test_hedged_quantity_empty_cell():
    hours = _month_hours()[:5]
    with pytest.raises(DomainError):
        hedged_quantity(np.ones(5), hours, 202104, True, 1.0)


@pytest.mark.parametrize("g,q,e", [(1800, 1000, 800), (1000, 1000, 0), (200, 1000, -800)])
def test_net_exposure(g, q, e):
    assert net_exposure(g, q) == e


@pytest.mark.parametrize("p,c,m", [(150, 50, 100), (50, 50, 0), (40, 140, -100)])
def test_margin(p, c, m):
    assert margin(p, c) == m


@pytest.mark.parametrize("args,val", [((0.008, 800, 100), -93.6), ((0.008, 800, 1), 5.4), ((0.04, 4900, 1), 195)])
def test_net_profit_withhold(args, val):
    assert net_profit_withhold(*args) == pytest.approx(val)


@pytest.mark.parametrize("args,val", [((0.006, -800, -100), -95.2), ((0.006, -800, -10), -5.2),
                                      ((0.04, -9000, -5), 355.0)])
def test_net_profit_pushin(args, val):
    assert net_profit_pushin(*args) == pytest.approx(val)


def test_block_profit():
    assert block_net_profit(0.008, 800, 1, 100, "marginal_scaled") == pytest.approx(540)
    assert block_net_profit(0.008, 800, 1, 100, "exact") == pytest.approx(460)
    for mode in ("exact", "marginal_scaled"):
        assert block_net_profit(0.0, 123, 10, 100, mode) == pytest.approx(-1000)
    q = 1e-6
    assert block_net_profit(0.008, 800, 1, q) / q == pytest.approx(net_profit_withhold(0.008, 800, 1), rel=1e-6)
    with pytest.raises(DomainError):
        block_net_profit(0.008, 800, 1, 0)


def test_antisymmetry_and_linearity():
    rng = np.random.default_rng(0)
    d, e, m = rng.uniform(0, 0.05, 1000), rng.uniform(-5000, 5000, 1000), rng.uniform(-200, 200, 1000)
    assert np.array_equal(net_profit_withhold(d, e, m), -net_profit_pushin(d, e, m))
    w = net_profit_withhold(d, e, m)
    assert np.allclose(net_profit_withhold(2 * d, e, m) - w, d * e, atol=1e-9)


def test_hedge_neutral_months_and_zero_rate():
    start = _hour(pd.Timestamp("2021-01-01", tz="UTC"))
    hours = np.arange(start, start + 24 * 90)
    G = np.random.default_rng(1).uniform(0, 5000, (len(hours), 3))
    Q, table = hedge_book(G, hours, 1.0)
    E = net_exposure(G, Q)
    cells = month_key(hours) * 2 + peak_class(hours)
    for j in range(3):
        assert max(abs(v) for v in hedge_neutral_means(E[:, j], cells).values()) < 1e-9
    Q0, _ = hedge_book(G, hours, 0.0)
    assert np.array_equal(net_exposure(G, Q0), G)
    assert set(table.columns) >= {"month", "on_peak", "hedged_mw", "hedge_rate"}


def test_incentive_panel_and_round_trip(tmp_path):
    market = make_market(72, seed=1)
    units = make_units(3) + [UnitSpec("X", "C0", "other", 900.0, *([float("nan")] * 5), in_scope=False)]
    gen = make_generation(market, units)
    avail = np.ones((72, 4), bool)
    avail[:5, 0] = False
    delta = np.full(72, 0.004)
    panel = build_incentive_panel(market, units, gen, avail, delta, 1.0)
    assert len(panel) == 72 * 3 - 5
    assert "X" not in set(panel["unit_id"])
    assert np.array_equal(panel["pi_w"].to_numpy(), -panel["pi_p"].to_numpy())
    p = tmp_path / "incentive_panel.csv"
    write_incentive_panel(panel, p)
    back = load_incentive_panel(p)
    pd.testing.assert_frame_equal(back, panel)
