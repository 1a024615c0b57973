import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secondorder.indicators import (
    IndicatorSpec,
    UndefinedICError,
    build_features,
    compute_indicator,
    default_specs,
    information_coefficient,
    pearson,
    read_features,
    write_features,
    zscore_cross_section,
)
from secondorder.market_data import PricePanel, ReturnMatrix, compute_returns


def make_panel(o, c, h=None, lo=None):
    o, c = np.atleast_2d(o).astype(float), np.atleast_2d(c).astype(float)
    h = np.maximum(o, c) if h is None else np.atleast_2d(h)
    lo = np.minimum(o, c) if lo is None else np.atleast_2d(lo)
    T, N = c.shape
    return PricePanel(np.datetime64("2022-01-03") + np.arange(T), [f"S{i}" for i in range(N)],
                      o, h, lo, c, np.ones((T, N)), np.zeros((T, N), dtype=bool))


def test_klen():
    p = make_panel([[100.0]], [[102.0]])
    assert compute_indicator(IndicatorSpec("KLEN"), p)[0, 0] == pytest.approx(0.02, abs=1e-15)


def test_ema_one_is_close(rng):
    c = 10 + rng.random((12, 3))
    p = make_panel(c, c)
    assert np.array_equal(compute_indicator(IndicatorSpec("EMA", 1), p), p.close)


def test_roc_constant_series():
    c = np.full((15, 2), 4.0)
    roc = compute_indicator(IndicatorSpec("ROC", 5), make_panel(c, c))
    assert np.all(np.isnan(roc[:5])) and np.all(roc[5:] == 0.0)


def test_default_specs_has_19_columns():
    names = [s.name for s in default_specs()]
    assert len(names) == 19 and names[:7] == ["OPEN", "HIGH", "LOW", "CLOSE", "KLEN", "KUP", "KLOW"]
    assert IndicatorSpec.parse("BIAS_10") == IndicatorSpec("BIAS", 10)


def test_two_point_zscore():
    z = zscore_cross_section(np.array([[[1.0], [3.0]]]))
    assert z[0, :, 0].tolist() == [-1.0, 1.0]


def test_normalize_off_passes_raw(rng):
    c = 10 + rng.random((25, 4))
    p = make_panel(c * 0.99, c)
    f = build_features(p, normalize=False)
    j = f.names.index("MA_5")
    assert np.array_equal(f.values[:, :, j], compute_indicator(IndicatorSpec("MA", 5), p), equal_nan=True)


def test_pearson_cases(rng):
    r = rng.normal(size=6)
    assert pearson(r, r) == pytest.approx(1.0, abs=1e-15)
    assert pearson(-r, r) == pytest.approx(-1.0, abs=1e-15)
    a, b = rng.normal(size=5), rng.normal(size=5)
    ma, mb = sum(a) / 5, sum(b) / 5
    num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    den = (sum((x - ma) ** 2 for x in a) * sum((y - mb) ** 2 for y in b)) ** 0.5
    assert abs(pearson(a, b) - num / den) <= 1e-12
    with pytest.raises(UndefinedICError):
        pearson(np.ones(4), r[:4])
    with pytest.raises(UndefinedICError):
        pearson(np.array([1.0, np.nan]), np.array([2.0, 3.0]))


def test_ic_on_day():
    feat = np.array([[1.0, 2.0, 3.0]])
    rets = ReturnMatrix(np.array([[0.1, 0.2, 0.3]]), 1, np.array(["2020-01-01"], dtype="datetime64[D]"),
                        ("A", "B", "C"))
    assert information_coefficient(feat, rets, 0) == pytest.approx(1.0)


def test_feature_csv_round_trip(tmp_path, rng):
    c = 10 + np.cumsum(rng.normal(0, 0.1, (30, 3)), axis=0)
    p = make_panel(c * 1.001, c)
    f, r = build_features(p), compute_returns(p)
    write_features(f, r, tmp_path / "f.csv")
    f2, r2 = read_features(tmp_path / "f.csv")
    assert f2.names == f.names
    assert np.array_equal(f2.values, f.values, equal_nan=True)
    assert np.array_equal(r2.values, r.values, equal_nan=True)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1.0, 1e4), min_size=3, max_size=30), st.integers(1, 10))
def test_ma_property(closes, m):
    c = np.array(closes)[:, None]
    ma = compute_indicator(IndicatorSpec("MA", m), make_panel(c, c))[:, 0]
    assert np.all(np.isnan(ma[: m - 1]))
    for t in range(m - 1, len(closes)):
        assert ma[t] == pytest.approx(np.mean(closes[t - m + 1: t + 1]), rel=1e-12)
        assert min(closes[t - m + 1: t + 1]) * (1 - 1e-12) <= ma[t] <= max(closes[t - m + 1: t + 1]) * (1 + 1e-12)


def test_ic_affine_invariance(rng):
    feat, ret = rng.normal(size=(1, 8)), rng.normal(size=(1, 8))
    rets = ReturnMatrix(ret, 1, np.array(["2020-01-01"], dtype="datetime64[D]"), [f"S{i}" for i in range(8)])
    ic = information_coefficient(feat, rets, 0)
    assert abs(information_coefficient(3.0 * feat + 2.0, rets, 0) - ic) <= 1e-12
    assert abs(information_coefficient(-0.5 * feat, rets, 0) + ic) <= 1e-12
    assert abs(information_coefficient(zscore_cross_section(feat[..., None])[..., 0], rets, 0) - ic) <= 1e-12
