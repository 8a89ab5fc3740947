import numpy as np
import pandas as pd
import pytest
from scipy.special import expit

from conftest import synth_inputs
from oracles import logit_grid_search, logit_loglik
from marketpower.errors import DomainError, SeparationError
from marketpower.econometrics import (
    LogitFit,
    Skipped,
    fit_logit,
    hedge_sensitivity,
    predict_prob,
    regime_split_fit,
    subgroup_fits,
)

W = (-1.166, 0.0102)
P = (-0.9327, 0.0034)


def _simulate(beta, n, seed, lo=-900, hi=300):
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, n)
    y = (rng.random(n) < expit(beta[0] + beta[1] * x)).astype(float)
    return x, y


@pytest.mark.parametrize("beta,pi,p", [(W, -94, 0.107), (W, 195, 0.695), (P, -95, 0.222)])
def test_predict_prob_table_values(beta, pi, p):
    assert predict_prob(beta, pi) == pytest.approx(p, abs=5e-4)


def test_predict_prob_extremes():
    out = predict_prob((0.0, 1.0), np.array([-700.0, -30, 0, 30, 700]))
    assert np.all(np.isfinite(out))
    assert out[2] == 0.5
    assert np.all(np.diff(out) >= 0)
    assert np.all((out[1:-1] > 0) & (out[1:-1] < 1))


def test_fair_coin():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 300, 10_000)
    y = (rng.random(10_000) < 0.5).astype(float)
    fit = fit_logit(x, y)
    assert abs(fit.beta1) < 3 * fit.se1
    assert abs(fit.beta0) < 3 * fit.se0


def test_recovery_large_sample():
    x, y = _simulate(W, 100_000, 1)
    fit = fit_logit(x, y)
    assert abs(fit.beta0 - W[0]) < 3 * fit.se0
    assert abs(fit.beta1 - W[1]) < 3 * fit.se1
    assert fit.converged and fit.grad_norm < 1e-8
    assert 0 <= fit.mcfadden_r2 < 1


def test_matches_grid_search():
    x, y = _simulate((0.3, 0.004), 20, 7, -400, 400)
    fit = fit_logit(x, y)
    b0, b1 = logit_grid_search(x, y, center=(0.0, 0.0), half_width=(4.0, 0.05))
    assert fit.beta0 == pytest.approx(b0, abs=2e-4)
    assert fit.beta1 == pytest.approx(b1, abs=2e-4)
    assert fit.ll >= logit_loglik(b0, b1, x, y) - 1e-9


def test_single_class():
    with pytest.raises(SeparationError, match="single class"):
        fit_logit(np.arange(10.0), np.zeros(10))


def test_perfect_separation_named():
    x = np.arange(20.0)
    with pytest.raises(SeparationError, match="separat"):
        fit_logit(x, (x > 9.5).astype(float))


def test_non_finite_predictor():
    x = np.array([1.0, np.nan, 3.0, 4.0])
    with pytest.raises(DomainError):
        fit_logit(x, np.array([0.0, 1, 0, 1]))


def test_loglik_path_nondecreasing():
    x, y = _simulate(W, 5000, 2)
    path = np.array(fit_logit(x, y).ll_path)
    assert len(path) >= 2
    assert np.all(np.diff(path) >= -1e-9 * abs(path[0]))


def test_null_model_r2_zero():
    rng = np.random.default_rng(3)
    y = (rng.random(400) < 0.3).astype(float)
    x = np.where(np.arange(400) % 2 == 0, 1.0, -1.0)
    y[::2] = y[1::2]  # identical class rates on both predictor values
    fit = fit_logit(x, y)
    assert fit.beta1 == pytest.approx(0, abs=1e-10)
    assert fit.mcfadden_r2 == pytest.approx(0, abs=1e-12)


def test_affine_scaling():
    x, y = _simulate(W, 3000, 4)
    a = fit_logit(x, y)
    b = fit_logit(x * 3.0, y)
    assert b.beta1 == pytest.approx(a.beta1 / 3.0, rel=1e-9)
    assert np.max(np.abs(predict_prob(a, x) - predict_prob(b, 3.0 * x))) < 1e-10


def _panel(n, seed):
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 2, n).astype(float)
    pi_w = rng.uniform(-900, 300, n)
    pi_p = -pi_w
    y = np.zeros(n)
    on = z == 1
    y[on & (rng.random(n) < expit(W[0] + W[1] * pi_w))] = -1
    y[~on & (rng.random(n) < expit(P[0] + P[1] * pi_p))] = 1
    return pd.DataFrame({"hour": np.arange(n), "z": z, "y": y, "pi_w": pi_w, "pi_p": pi_p})


def test_regimes_are_independent():
    panel = _panel(4000, 5)
    w, p = regime_split_fit(panel)
    w_only, _ = regime_split_fit(panel[panel["z"] == 1].assign(pi_p=1e9))
    _, p_only = regime_split_fit(panel[panel["z"] == 0].assign(pi_w=-1e9))
    assert (w.beta0, w.beta1) == (w_only.beta0, w_only.beta1)
    assert (p.beta0, p.beta1) == (p_only.beta0, p_only.beta1)
    assert isinstance(regime_split_fit(panel[panel["z"] == 1])[1], Skipped)


def test_excluded_rows_dropped():
    panel = _panel(2000, 6)
    extra = panel.iloc[:300].assign(z=np.nan, y=np.nan, pi_w=1e6)
    a = regime_split_fit(panel)
    b = regime_split_fit(pd.concat([panel, extra]))
    assert a[0].beta1 == b[0].beta1 and a[1].beta1 == b[1].beta1


def test_no_deviation_panel_reported():
    panel = _panel(500, 7).assign(y=0.0)
    w, p = regime_split_fit(panel)
    assert isinstance(w, Skipped) and isinstance(p, Skipped)
    assert "single class" in w.reason and w.n > 0


def test_subgroups_by_year():
    panel = pd.concat([_panel(3000, 8).assign(year=2021), _panel(3000, 9).assign(year=2022)])
    fits = subgroup_fits(panel, "year")
    assert sorted(fits) == [2021, 2022]
    assert all(isinstance(f, LogitFit) for pair in fits.values() for f in pair)
    pooled = regime_split_fit(panel)[0]
    sub = panel[(panel["z"] == 1)]
    for _, g in sub.groupby("year"):
        y = (g["y"] == -1).to_numpy(float)
        at_pooled = logit_loglik(pooled.beta0, pooled.beta1, g["pi_w"], y)
        own = fit_logit(g["pi_w"].to_numpy(), y).ll
        assert at_pooled <= own + 1e-9


def test_subgroup_without_deviations_skipped():
    quiet = _panel(800, 10).assign(fuel_type="ccgt", y=0.0)
    panel = pd.concat([_panel(3000, 11).assign(fuel_type="lignite"), quiet])
    fits = subgroup_fits(panel, "fuel_type")
    assert isinstance(fits["ccgt"][0], Skipped) and fits["ccgt"][0].reason
    assert isinstance(fits["lignite"][0], LogitFit)


def test_subgroup_missing_column():
    with pytest.raises(DomainError):
        subgroup_fits(_panel(10, 0), "company")


def test_wald_coverage():
    hits = 0
    for rep in range(200):
        x, y = _simulate(W, 2000, 1000 + rep)
        lo, hi = fit_logit(x, y).wald_interval()
        hits += lo <= W[1] <= hi
    assert hits >= 186


def test_hedge_rate_outside_unit_interval():
    with pytest.raises(DomainError):
        hedge_sensitivity(lambda r: None, _panel(10, 0), [1.2])


@pytest.fixture(scope="module")
def synth_run():
    from marketpower.monte_carlo import McConfig
    from marketpower.pipeline import PipelineConfig, dispatch_stage, incentives_stage, slope_stage
    from marketpower.synthetic import SynthConfig, generate_market, with_hours

    scfg = with_hours(SynthConfig(n_units=20, seed=3, mc=McConfig(iterations=50)), 4000)
    inputs = synth_inputs(generate_market(scfg))
    pcfg = PipelineConfig(market="m", units="u", generation="g", mc=scfg.mc)
    dispatch = dispatch_stage(inputs, pcfg)
    model = slope_stage(inputs, pcfg)
    return dispatch, (lambda r: incentives_stage(inputs, model, pcfg, r))


def test_hedge_sensitivity_on_synthetic(synth_run):
    dispatch, inc = synth_run
    rows = hedge_sensitivity(inc, dispatch, [1.0, 0.7, 0.0])
    assert [r["hedge_rate"] for r in rows] == [1.0, 0.7, 0.0]
    main = regime_split_fit(dispatch.assign(pi_w=inc(1.0)["pi_w"].to_numpy(), pi_p=inc(1.0)["pi_p"].to_numpy()))
    assert rows[0]["withhold"] == main[0] and rows[0]["pushin"] == main[1]
    assert rows[0]["withhold"].beta1 > rows[2]["withhold"].beta1


@pytest.mark.xfail(strict=True, reason="the 0.3*delta*Q shift at r=0.7 is negatively correlated with "
                   "pi_w(r=1) on generated data, which compresses the predictor and inflates beta1")
def test_withhold_coefficient_largest_at_planted_rate(synth_run):
    dispatch, inc = synth_run
    b = [r["withhold"].beta1 for r in hedge_sensitivity(inc, dispatch, [1.0, 0.7, 0.0])]
    assert b[0] > b[1] and b[0] > b[2]
