import math

import numpy as np
import pytest

from secondorder.first_order import RidgeConfig, param_collect
from secondorder.second_order import (
    LstmWeights,
    NonFiniteGradientError,
    TrainConfig,
    WindowError,
    assemble_window,
    forward,
    gradients,
    init_model,
    load_model,
    lstm_step,
    predict_rolling,
    save_model,
    train,
)
from secondorder.synthetic import RegimeSpec, generate, oracle_mse


def zero_weights(h, p, forget=0.0):
    b = np.zeros(4 * h)
    b[h:2 * h] = forget
    return LstmWeights(np.zeros((4 * h, p)), np.zeros((4 * h, h)), b)


def sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def test_lstm_step_zero():
    h, c = lstm_step(zero_weights(3, 2), np.zeros(2), (np.zeros(3), np.zeros(3)))
    assert np.all(h == 0) and np.all(c == 0)


def test_lstm_step_pure_memory():
    _, c = lstm_step(zero_weights(2, 2, forget=50.0), np.ones(2), (np.zeros(2), np.ones(2)))
    assert np.allclose(c, 1.0, atol=1e-15)


def test_lstm_step_scalar_oracle(rng):
    H, P = 3, 4
    W, U, b = rng.normal(0, 0.3, (4 * H, P)), rng.normal(0, 0.3, (4 * H, H)), rng.normal(0, 0.3, 4 * H)
    x, h0, c0 = rng.normal(size=P), rng.normal(size=H), rng.normal(size=H)
    h1, c1 = lstm_step(LstmWeights(W, U, b), x, (h0, c0))
    for j in range(H):
        pre = []
        for g in range(4):  # gate order: input, forget, output, cell
            row = g * H + j
            pre.append(sum(W[row, k] * x[k] for k in range(P)) + sum(U[row, k] * h0[k] for k in range(H)) + b[row])
        i, f, o, g = sig(pre[0]), sig(pre[1]), sig(pre[2]), math.tanh(pre[3])
        c = f * c0[j] + i * g
        assert abs(c1[j] - c) <= 1e-12
        assert abs(h1[j] - o * math.tanh(c)) <= 1e-12


def window_for(model, rng):
    return {s: rng.normal(size=(model.steps, model.input_dim)) for s in model.scales}


def test_single_scale_fusion_collapse(rng):
    m = init_model([1], 2, 2, hidden=3, seed=1)
    w = window_for(m, rng)
    params, _ = forward(m, w, np.zeros(2))
    # run the cell by hand and apply the identity-prefix head
    h, c = np.zeros(3), np.zeros(3)
    for row in w[1]:
        h, c = lstm_step(m.lstm(1), row, (h, c))
    assert np.allclose(params.vector(), m.head_C @ h, atol=1e-14)


def test_zero_attention_gives_head_bias(rng):
    m = init_model([1, 5], 3, 2, hidden=4, seed=2)
    m.alpha[:] = 0.0
    m.head_beta[:] = [0.1, -0.2, 0.3]
    for _ in range(3):
        params, _ = forward(m, window_for(m, rng), rng.normal(size=2))
        assert np.allclose(params.vector(), m.head_beta)


def test_scale_fusion_linearity(rng):
    m = init_model([1, 5], 3, 2, hidden=4, seed=3)
    w, x = window_for(m, rng), rng.normal(size=(5, 2))
    _, y0 = forward(m, w, x)
    m2 = m.copy()
    m2.alpha *= 3.0
    m2.head_C /= 3.0
    _, y1 = forward(m2, w, x)
    assert np.allclose(y0, y1, rtol=1e-13, atol=1e-15)


def test_gradients_vanish_at_minimum(rng):
    m = init_model([1, 2], 2, 3, hidden=4, seed=4)
    w, x = window_for(m, rng), rng.normal(size=(6, 3))
    _, y = forward(m, w, x)
    g = gradients(m, w, x, y)
    assert all(np.max(np.abs(g[n])) <= 1e-14 for n in m.trainable())


def test_alpha_gradient_zero_for_dead_hidden(rng):
    m = init_model([1, 2], 2, 3, hidden=4, seed=5)
    m.W[0] = 0.0
    m.U[0] = 0.0
    m.b[0] = 0.0
    g = gradients(m, window_for(m, rng), rng.normal(size=(4, 3)), rng.normal(size=4))
    assert g["alpha"][0] == 0.0 and g["alpha"][1] != 0.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_gradient_names_parameter(rng):
    m = init_model([1], 2, 2, hidden=3, seed=6)
    m.head_C[0, 0] = np.inf
    with pytest.raises(NonFiniteGradientError, match="head"):
        gradients(m, window_for(m, rng), rng.normal(size=2), 0.0)


def test_window_errors(rng):
    m = init_model([1, 5], 3, 2, hidden=3)
    w = window_for(m, rng)
    del w[5]
    with pytest.raises(WindowError):
        forward(m, w, np.zeros(2))
    w = window_for(m, rng)
    w[1] = w[1][:2]
    with pytest.raises(WindowError):
        forward(m, w, np.zeros(2))


def test_identity_head_needs_matching_hidden():
    with pytest.raises(ValueError):
        init_model([1], 2, 3, hidden=5, head="identity")
    m = init_model([1], 2, 3, hidden=4, head="identity")
    assert "head.C" not in m.trainable()


def small_market(pattern="constant", seed=0, **kw):
    kw.setdefault("weights", (0.01, 0.005, -0.005))
    return generate(RegimeSpec(pattern=pattern, n_stocks=12, n_days=220, noise_std=0.01, seed=seed, **kw))


def test_no_update_keeps_initial_weights():
    m = small_market()
    res = train(m.features, m.returns, [1, 5], 3, TrainConfig(episodes=1, learning_rate=0.0, hidden=4, seed=9),
                train_days=(0, 149))
    ref = init_model([1, 5], 3, 3, hidden=4, seed=9)
    for name in ("W", "U", "b", "alpha", "head_C"):
        assert np.array_equal(getattr(res.model, name), getattr(ref, name))


def test_stationary_market_near_bayes_floor():
    m = generate(RegimeSpec(pattern="constant", n_stocks=20, n_days=400, noise_std=0.01,
                            weights=(0.01, 0.005, -0.005), seed=3))
    res = train(m.features, m.returns, [1, 5, 10], 3, TrainConfig(episodes=300, seed=3), train_days=(0, 249))
    preds, _ = predict_rolling(res.model, m.features, m.returns, (250, 398), series=res.series)
    err, floor = oracle_mse(m, preds, range(250, 399))
    assert err <= 1.1 * floor


def test_one_day_prediction_extends_series():
    m = small_market()
    model = init_model([1, 5], 3, 3, hidden=4)
    preds, series = predict_rolling(model, m.features, m.returns, (100, 100))
    assert preds.shape == (1, 12)
    before = param_collect(m.features, m.returns, [1, 5], days=range(0, 100))
    assert all(len(series[s]) == len(before[s]) + 1 for s in (1, 5))


def test_predictions_only_read_the_past():
    m = small_market("sinusoidal", weights=())
    model = init_model([1, 5], 3, 3, hidden=4)
    series = param_collect(m.features, m.returns, [1, 5], days=range(0, 120))
    window = assemble_window(series, [1, 5], 3, 120)
    assert max(len(v) for v in window.values()) == 3
    with pytest.raises(WindowError):
        assemble_window(series, [1, 5], 3, 121)  # theta_120 not collected yet
    preds, _ = predict_rolling(model, m.features, m.returns, (120, 125), series=series)
    assert np.isfinite(preds).all()


def test_training_is_deterministic(tmp_path):
    m = small_market("sinusoidal", weights=())
    cfg = TrainConfig(episodes=30, hidden=5, seed=11)
    a = train(m.features, m.returns, [1, 5], 3, cfg, train_days=(0, 149))
    b = train(m.features, m.returns, [1, 5], 3, cfg, train_days=(0, 149))
    save_model(a.model, tmp_path / "a.txt")
    save_model(b.model, tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    back = load_model(tmp_path / "a.txt")
    x = m.features.values[160]
    w = assemble_window(a.series, [1, 5], 3, 149)
    assert np.array_equal(forward(back, w, x)[1], forward(a.model, w, x)[1])


def test_retrain_daily_runs():
    m = small_market("sinusoidal", weights=())
    cfg = TrainConfig(episodes=20, hidden=4, seed=1, retrain_episodes=3)
    res = train(m.features, m.returns, [1, 5], 3, cfg, RidgeConfig(), train_days=(0, 149))
    preds, _ = predict_rolling(res.model, m.features, m.returns, (150, 153), series=res.series, retrain=cfg)
    assert preds.shape == (4, 12) and np.isfinite(preds).all()
