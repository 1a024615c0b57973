import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secondorder import backtest as bt
from secondorder.market_data import ReturnMatrix


def rmat(values, symbols=None):
    values = np.asarray(values, dtype=float)
    T, N = values.shape
    syms = symbols or [f"S{i}" for i in range(N)]
    return ReturnMatrix(values, 1, np.datetime64("2021-01-04") + np.arange(T), syms)


def test_select_top_k():
    assert bt.select_top_k({"A": 0.3, "B": 0.1, "C": 0.2}, 2) == ["A", "C"]
    assert bt.select_top_k({"B": 0.5, "A": 0.5}, 1) == ["A"]
    assert sorted(bt.select_top_k({"A": 1, "B": 2, "C": 3}, 10)) == ["A", "B", "C"]
    with pytest.raises(ValueError):
        bt.select_top_k({}, 1)


def test_zero_returns_flat_equity():
    rep = bt.simulate(np.random.default_rng(0).normal(size=(5, 4)), rmat(np.zeros((5, 4))), 2, range(5))
    assert np.all(rep.equity == 1.0) and rep.ar == 0.0


def test_single_stock_compounding():
    r = 0.003
    rep = bt.simulate(np.ones((20, 1)), rmat(np.full((20, 1), r)), 1, range(20))
    assert rep.equity[-1] == pytest.approx((1 + r) ** 20, rel=1e-13)
    assert np.allclose(rep.baseline, rep.equity)


def test_annualized_return_arithmetic():
    assert bt.annualized_return([[0.001]] * 365, 1) == pytest.approx(0.365, rel=1e-13)
    assert bt.annualized_return([[0.0, 0.0]] * 10, 2) == 0.0


def test_sharpe_cases():
    shr, skipped = bt.sharpe_ratio([[0.02, 0.0]], [0.01], 2)
    assert shr == 0.0 and skipped == 0
    shr, _ = bt.sharpe_ratio([[0.03, 0.05]], [0.0], 2)
    assert shr > 0
    shr, skipped = bt.sharpe_ratio([[0.01, 0.01], [0.03, 0.05]], [0.0, 0.0], 2)
    assert skipped == 1 and shr == pytest.approx(0.04 / 0.01)
    with pytest.raises(bt.UndefinedSharpeError):
        bt.sharpe_ratio([[0.01, 0.01]], [0.0], 2)


def test_market_baseline():
    r = np.tile([0.01, -0.01], (30, 1))
    assert np.allclose(bt.market_baseline(rmat(r), range(30)), 1.0, atol=1e-15)
    nan_day = np.full((2, 2), np.nan)
    nan_day[1] = 0.1
    assert bt.market_baseline(rmat(nan_day), [0, 1]).tolist() == pytest.approx([1.0, 1.0, 1.1])


def test_suspended_selection_is_cash():
    r = np.array([[np.nan, 0.01, 0.02]])
    rep = bt.simulate(np.array([[3.0, 2.0, 1.0]]), rmat(r), 2, [0])
    assert rep.days[0].returns.tolist() == [0.0, 0.01]
    assert rep.days[0].portfolio_return == pytest.approx(0.005)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        bt.simulate(np.zeros((2, 3)), rmat(np.zeros((2, 4))), 1, [0, 1])


def test_csv_and_svg(tmp_path):
    rng = np.random.default_rng(1)
    rep = bt.simulate(rng.normal(size=(10, 5)), rmat(rng.normal(0, 0.01, (10, 5))), 2, range(10))
    curves = {"top2": (rep.dates, rep.equity), "market": (rep.dates, rep.baseline)}
    bt.write_equity_csv(curves, tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "date,strategy,wealth" and len(lines) == 21
    bt.write_metrics_csv(rep.metrics(), tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().startswith("metric,value\nAR@2,")
    bt.plot_equity_svg(curves, tmp_path / "a.svg")
    bt.plot_equity_svg(curves, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=12), st.integers(1, 12))
def test_selection_invariant_to_monotone_transform(values, k):
    # integer inputs keep the cubic transform exact in floating point, ties included
    preds = {f"S{i:02d}": float(v) for i, v in enumerate(values)}
    squashed = {s: v ** 3 + 5 * v - 2 for s, v in preds.items()}
    assert bt.select_top_k(preds, k) == bt.select_top_k(squashed, k)


def test_full_book_is_the_market(rng):
    r = rng.normal(0, 0.01, (15, 6))
    rep = bt.simulate(rng.normal(size=(15, 6)), rmat(r), 6, range(15))
    assert np.allclose(rep.equity, rep.baseline, rtol=1e-14)


def test_shr_joint_invariances(rng):
    sel = [rng.normal(0, 0.02, 4) for _ in range(6)]
    mkt = rng.normal(0, 0.01, 6).tolist()
    base, _ = bt.sharpe_ratio(sel, mkt, 4)
    shifted, _ = bt.sharpe_ratio([s + 0.3 for s in sel], [m + 0.3 for m in mkt], 4)
    scaled, _ = bt.sharpe_ratio([s * 2.5 for s in sel], [m * 2.5 for m in mkt], 4)
    assert shifted == pytest.approx(base, rel=1e-9) and scaled == pytest.approx(base, rel=1e-12)
