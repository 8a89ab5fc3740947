import numpy as np
import pytest

from marketpower.market_data import MarketSeries, ObservedGeneration, OutageMask, UnitSpec

START = 438288  # 2020-01-01T00:00Z in epoch hours


def make_market(n=48, seed=0, start=START, **overrides):
    rng = np.random.default_rng(seed)
    cols = {
        "spot_price": rng.uniform(20, 120, n),
        "demand": rng.uniform(40000, 70000, n),
        "vre_generation": rng.uniform(0, 30000, n),
        "gas_price": rng.uniform(15, 40, n),
        "coal_price": rng.uniform(8, 20, n),
        "carbon_price": rng.uniform(20, 90, n),
    }
    cols.update({k: np.asarray(v, dtype=float) for k, v in overrides.items()})
    return MarketSeries(hours=np.arange(start, start + n, dtype=np.int64), **cols)


def make_units(n=3, companies=2):
    fuels = ("lignite", "hard_coal", "ccgt", "gas_other")
    return [
        UnitSpec(f"U{i}", f"C{i % companies}", fuels[i % 4], capacity=300.0 + 50 * i, min_load=100.0,
                 efficiency=0.4, startup_depreciation=20.0, cold_start_fuel=3.0, cold_start_factor=1.0)
        for i in range(n)
    ]


def make_generation(market, units, seed=0):
    rng = np.random.default_rng(seed)
    mw = np.column_stack([np.where(rng.random(len(market)) < 0.5, 0.0, u.capacity) for u in units])
    return ObservedGeneration(np.asarray(market.hours), tuple(u.unit_id for u in units), mw)


def make_outages(market, units, available=None):
    n, k = len(market), len(units)
    av = np.ones((n, k), dtype=bool) if available is None else np.asarray(available, dtype=bool)
    return OutageMask(np.asarray(market.hours), tuple(u.unit_id for u in units), av)


@pytest.fixture
def market():
    return make_market()


@pytest.fixture
def units():
    return make_units()


def synth_inputs(synth):
    """Pipeline inputs straight from a generated market, skipping file ingest."""
    from marketpower.pipeline import Inputs

    avail = np.column_stack([synth.outages.column(u.unit_id) for u in synth.units])
    return Inputs(synth.market, synth.units, synth.generation, avail)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
