import numpy as np
import pytest

from secondorder.first_order import RidgeConfig, fit_window, static_first_order
from secondorder.market_data import load_panel, save_panel
from secondorder.synthetic import RegimeSpec, generate, mse, oracle_mse, write_truth


def test_noise_free_constant_is_identifiable():
    m = generate(RegimeSpec(pattern="constant", noise_std=0.0, weights=(0.01, -0.02, 0.005), bias=0.001))
    for start, end in [(0, 4), (100, 130), (500, 598)]:
        p = fit_window(m.features, m.returns, start, end, RidgeConfig(l2_weight=0.0))
        assert np.max(np.abs(p.w - [0.01, -0.02, 0.005])) <= 1e-8
        assert abs(p.b - 0.001) <= 1e-8


def test_prices_reproduce_returns():
    m = generate(RegimeSpec(pattern="sinusoidal", seed=3))
    gen = np.einsum("tnd,td->tn", m.latent, m.true_weights) + m.true_bias[:, None] + m.noise
    assert np.allclose(m.returns.values[:-1], gen[:-1], atol=1e-12)
    assert np.all(m.panel.low <= np.minimum(m.panel.open, m.panel.close))
    assert np.all(m.panel.high >= np.maximum(m.panel.open, m.panel.close))


def test_step_switch_weight_delta():
    delta = np.array([-0.04, 0.01, 0.0])
    m = generate(RegimeSpec(pattern="step_switch", noise_std=0.0, switch_days=(50,),
                            weight_sets=((0.02, 0.0, 0.01), tuple(np.array([0.02, 0.0, 0.01]) + delta))))
    cfg = RidgeConfig(l2_weight=0.0)
    before = fit_window(m.features, m.returns, 45, 49, cfg)
    after = fit_window(m.features, m.returns, 50, 54, cfg)
    assert np.allclose(after.w - before.w, delta, atol=1e-8)


def test_same_seed_same_market():
    spec = RegimeSpec(pattern="random_walk", seed=8)
    a, b = generate(spec), generate(spec)
    assert a.panel.equals(b.panel) and np.array_equal(a.true_weights, b.true_weights)
    assert not generate(RegimeSpec(pattern="random_walk", seed=9)).panel.equals(a.panel)


def test_mse_reference_points():
    m = generate(RegimeSpec(pattern="constant", noise_std=0.0, weights=(0.01, 0.0, 0.0)))
    days = range(10, 20)
    perfect = np.einsum("tnd,td->tn", m.latent[10:20], m.true_weights[10:20])
    assert oracle_mse(m, perfect, days)[0] == pytest.approx(0.0, abs=1e-28)
    r = m.returns.values[:-1]
    assert mse(np.zeros_like(r), r) == pytest.approx(np.mean(r ** 2))


def test_static_model_pays_for_drift():
    spec = RegimeSpec(pattern="sinusoidal", noise_std=0.01, amplitude=0.01, seed=1)
    m = generate(spec)
    _, preds = static_first_order(m.features, m.returns, (0, 359), (360, 598))
    err, floor = oracle_mse(m, preds, range(360, 599))
    # drifting weights add about d * A^2 / 2 on top of the noise floor
    assert err > floor + 0.5 * 3 * spec.amplitude ** 2 / 2


def test_indicator_mode_and_csv(tmp_path):
    m = generate(RegimeSpec(pattern="constant", n_days=60, feature_mode="indicators"))
    assert m.features.n_features == 19
    save_panel(m.panel, tmp_path / "prices.csv")
    assert load_panel(tmp_path / "prices.csv").equals(m.panel)
    write_truth(m, tmp_path / "truth.csv")
    head = (tmp_path / "truth.csv").read_text().splitlines()
    assert head[0] == "date,b,w_1,w_2,w_3" and len(head) == 61


@pytest.mark.parametrize("kw", [dict(pattern="bogus"), dict(noise_std=-1.0),
                                dict(pattern="step_switch", switch_days=(5,), weight_sets=((1, 0, 0),)),
                                dict(weights=(1.0,))])
def test_invalid_specs(kw):
    with pytest.raises(ValueError):
        RegimeSpec(**kw)
