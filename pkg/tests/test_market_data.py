import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_generation, make_market, make_outages, make_units
from marketpower.errors import (
    AlignmentError,
    ParseError,
    SchemaError,
    UnitReferenceError,
    ValidationError,
)
from marketpower.market_data import (
    MARKET_COLUMNS,
    UnitSpec,
    all_available,
    availability_filter,
    check_generation_bounds,
    format_float,
    load_generation,
    load_market,
    load_outages,
    load_units,
    residual_load,
    to_floats,
    write_generation,
    write_market,
    write_outages,
    write_units,
)


def _market_csv(tmp_path, rows):
    p = tmp_path / "market.csv"
    p.write_text(",".join(MARKET_COLUMNS) + "\n" + "".join(r + "\n" for r in rows))
    return p


def _row(ts, demand="50000"):
    return f"{ts},45.5,{demand},10000,20,10,30"


def test_load_48_rows(tmp_path):
    rows = [_row(f"2021-03-{1 + h // 24:02d}T{h % 24:02d}:00:00Z") for h in range(48)]
    ms = load_market(_market_csv(tmp_path, rows))
    assert len(ms) == 48
    assert ms.spot_price[0] == 45.5


def test_gap_names_timestamp(tmp_path):
    rows = [_row(f"2021-03-{1 + h // 24:02d}T{h % 24:02d}:00:00Z") for h in range(48) if h != 25]
    with pytest.raises(AlignmentError) as info:
        load_market(_market_csv(tmp_path, rows))
    assert info.value.timestamp == "2021-03-02T02:00:00Z"
    assert "2021-03-02T02:00:00Z" in str(info.value)


def test_negative_demand_rejected(tmp_path):
    rows = [_row("2021-03-01T00:00:00Z"), _row("2021-03-01T01:00:00Z", demand="-5")]
    with pytest.raises(ValidationError, match="demand"):
        load_market(_market_csv(tmp_path, rows))


def test_missing_column(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("timestamp,spot_price\n2021-01-01T00:00:00Z,1\n")
    with pytest.raises(SchemaError):
        load_market(p)


def test_non_numeric_cell_reports_row(tmp_path):
    rows = [_row("2021-03-01T00:00:00Z"), "2021-03-01T01:00:00Z,abc,1,1,1,1,1"]
    with pytest.raises(ParseError) as info:
        load_market(_market_csv(tmp_path, rows))
    assert info.value.row == 1


def test_missing_vre_value_rejected(tmp_path):
    rows = [_row("2021-03-01T00:00:00Z"), "2021-03-01T01:00:00Z,1,1,,1,1,1"]
    with pytest.raises(ParseError, match="missing"):
        load_market(_market_csv(tmp_path, rows))


def test_negative_spot_price_allowed():
    ms = make_market(4, spot_price=[-50, 0, 10, 20])
    assert ms.spot_price[0] == -50


@pytest.mark.parametrize("demand,vre,expected", [(50000, 20000, 30000), (40000, 40000, 0), (30000, 35000, -5000)])
def test_residual_load(demand, vre, expected):
    ms = make_market(2, demand=[demand] * 2, vre_generation=[vre] * 2)
    assert np.all(residual_load(ms) == expected)


def test_residual_load_linear_in_demand():
    ms = make_market(24)
    shifted = make_market(24, demand=ms.demand + 123.0)
    assert np.allclose(residual_load(shifted), residual_load(ms) + 123.0, rtol=0, atol=1e-9)


def test_market_round_trip_is_byte_identical(tmp_path):
    ms = make_market(30, seed=4)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_market(ms, a)
    write_market(load_market(a), b)
    assert a.read_bytes() == b.read_bytes()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_float_text_round_trip(values):
    text = [format_float(v) for v in values]
    assert np.array_equal(to_floats(text), np.asarray(values, dtype=float))


def test_units_round_trip(tmp_path):
    units = make_units(4) + [UnitSpec("X", "C0", "other", 500.0, float("nan"), float("nan"),
                                      float("nan"), float("nan"), float("nan"), in_scope=False)]
    a, b = tmp_path / "u.csv", tmp_path / "u2.csv"
    write_units(units, a)
    loaded = load_units(a)
    assert [u.unit_id for u in loaded] == [u.unit_id for u in units]
    assert loaded[0] == units[0]
    assert not loaded[-1].in_scope
    write_units(loaded, b)
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("kw", [
    dict(min_load=300.0),  # min_load >= capacity
    dict(efficiency=1.2),
    dict(startup_depreciation=-1.0),
    dict(fuel_type="nuclear"),
])
def test_unit_invariants(kw):
    base = dict(unit_id="U", company_id="C", fuel_type="ccgt", capacity=300.0, min_load=100.0,
                efficiency=0.5, startup_depreciation=1.0, cold_start_fuel=1.0, cold_start_factor=1.0)
    with pytest.raises(ValidationError):
        UnitSpec(**(base | kw))


def test_generation_and_outage_round_trip(tmp_path):
    ms, units = make_market(24), make_units(3)
    gen = make_generation(ms, units)
    mask = make_outages(ms, units, np.random.default_rng(1).random((24, 3)) < 0.8)
    write_generation(gen, tmp_path / "g.csv")
    write_outages(mask, tmp_path / "o.csv")
    g2 = load_generation(tmp_path / "g.csv", units, ms.hours)
    m2 = load_outages(tmp_path / "o.csv", units, ms.hours)
    assert np.array_equal(g2.mw, gen.mw)
    assert np.array_equal(m2.available, mask.available)
    write_generation(g2, tmp_path / "g2.csv")
    assert (tmp_path / "g.csv").read_bytes() == (tmp_path / "g2.csv").read_bytes()


def test_generation_unknown_unit(tmp_path):
    ms, units = make_market(2), make_units(2)
    p = tmp_path / "g.csv"
    p.write_text("timestamp,unit_id,generation_mw\n2020-01-01T00:00:00Z,ZZZ,1\n")
    with pytest.raises(UnitReferenceError):
        load_generation(p, units, ms.hours)


def test_generation_above_capacity(tmp_path):
    ms, units = make_market(3), make_units(1)
    gen = make_generation(ms, units)
    gen.mw[1, 0] = units[0].capacity + 10
    with pytest.raises(ValidationError, match="exceeds capacity"):
        check_generation_bounds(gen, units, make_outages(ms, units))


def test_availability_filter_counts():
    ms, units = make_market(24), make_units(3)
    av = np.ones((24, 3), dtype=bool)
    av[:, 1] = False
    av[:10, 2] = False
    sel = availability_filter(units, make_outages(ms, units, av))
    assert sel[:, 0].sum() == 24
    assert sel[:, 1].sum() == 0
    assert sel[:, 2].sum() == 14
    assert np.array_equal(availability_filter(units, all_available(units, ms.hours)), np.ones((24, 3), bool))


def test_availability_filter_idempotent_subset():
    ms, units = make_market(24), make_units(3)
    av = np.random.default_rng(0).random((24, 3)) < 0.6
    once = availability_filter(units, make_outages(ms, units, av))
    twice = availability_filter(units, make_outages(ms, units, once))
    assert np.array_equal(once, twice)
    assert not np.any(once & ~av)


def test_availability_filter_stray_unit():
    ms, units = make_market(4), make_units(3)
    with pytest.raises(UnitReferenceError):
        availability_filter(units[:2], make_outages(ms, units))
