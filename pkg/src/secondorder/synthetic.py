"""Synthetic markets with known, time-varying linear ground truth.

Each day ``t`` every stock draws an independent standard-normal feature
vector ``x_t^i`` and its forward return is::

    r[t, i] = w*_t . x_t^i + b*_t + eps,   eps ~ Normal(0, noise_std)

Closes are integrated multiplicatively from a base price of 100, so the
returns recovered from the panel equal the generated ones to rounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .indicators import FeatureMatrix, build_features
from .market_data import PricePanel, ReturnMatrix, compute_returns

PATTERNS = ("constant", "sinusoidal", "step_switch", "random_walk")
BASE_PRICE = 100.0


@dataclass(frozen=True)
class RegimeSpec:
    pattern: str = "constant"
    n_stocks: int = 20
    n_days: int = 600
    n_features: int = 3
    noise_std: float = 0.02
    seed: int = 0
    weights: tuple = ()  # constant / centre weights; empty means all zeros
    amplitude: float = 0.01  # sinusoidal amplitude per weight
    period: float = 40.0
    switch_days: tuple = ()
    weight_sets: tuple = ()  # one weight vector per step_switch segment
    step_std: float = 0.001
    bias: float = 0.0
    bias_amplitude: float = 0.0
    feature_mode: str = "latent"  # or "indicators"
    start_date: str = "2013-01-01"

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.n_stocks < 2:
            raise ValueError("n_stocks must be >= 2")
        if self.n_days < 2:
            raise ValueError("n_days must be >= 2")
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.pattern == "sinusoidal" and self.period < 2:
            raise ValueError("period must be >= 2 for sinusoidal")
        if self.weights and len(self.weights) != self.n_features:
            raise ValueError("weights length must equal n_features")
        if self.pattern == "step_switch":
            if len(self.weight_sets) != len(self.switch_days) + 1:
                raise ValueError("step_switch needs len(weight_sets) == len(switch_days) + 1")
            if any(len(ws) != self.n_features for ws in self.weight_sets):
                raise ValueError("every weight set must have n_features entries")
            if list(self.switch_days) != sorted(self.switch_days):
                raise ValueError("switch_days must be increasing")
        if self.pattern == "random_walk" and self.step_std < 0:
            raise ValueError("step_std must be >= 0")
        if self.feature_mode not in ("latent", "indicators"):
            raise ValueError("feature_mode must be 'latent' or 'indicators'")


@dataclass(frozen=True, eq=False)
class SyntheticMarket:
    panel: PricePanel
    features: FeatureMatrix
    returns: ReturnMatrix
    true_weights: np.ndarray  # [day x d]
    true_bias: np.ndarray  # [day]
    latent: np.ndarray = field(repr=False)  # generating features [day x stock x d]
    noise: np.ndarray = field(repr=False)
    spec: RegimeSpec = None


def true_parameters(spec: RegimeSpec, rng: np.random.Generator | None = None):
    """Ground-truth ``(w*[day x d], b*[day])`` for a regime."""
    T, d = spec.n_days, spec.n_features
    centre = np.asarray(spec.weights if spec.weights else np.zeros(d), dtype=float)
    t = np.arange(T, dtype=float)
    bias = np.full(T, float(spec.bias))
    if spec.pattern == "constant":
        w = np.tile(centre, (T, 1))
    elif spec.pattern == "sinusoidal":
        phases = 2.0 * np.pi * np.arange(d) / d
        w = centre + spec.amplitude * np.sin(2.0 * np.pi * t[:, None] / spec.period + phases)
        bias = bias + spec.bias_amplitude * np.sin(2.0 * np.pi * t / spec.period)
    elif spec.pattern == "step_switch":
        w = np.empty((T, d))
        edges = [0, *spec.switch_days, T]
        for k, ws in enumerate(spec.weight_sets):
            w[edges[k]:edges[k + 1]] = ws
    else:
        if rng is None:
            raise ValueError("random_walk needs a generator")
        steps = rng.normal(0.0, spec.step_std, size=(T, d))
        steps[0] = 0.0
        w = centre + np.cumsum(steps, axis=0)
    return w, bias


def business_days(start: str, n: int) -> np.ndarray:
    return np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")


def generate(spec: RegimeSpec) -> SyntheticMarket:
    rng = np.random.default_rng(spec.seed)
    T, N, d = spec.n_days, spec.n_stocks, spec.n_features
    w, b = true_parameters(spec, rng)
    x = rng.standard_normal((T, N, d))
    eps = rng.normal(0.0, spec.noise_std, size=(T, N)) if spec.noise_std > 0 else np.zeros((T, N))
    r = np.einsum("tnd,td->tn", x, w) + b[:, None] + eps
    if np.any(r[:-1] <= -1.0):
        raise ValueError("regime produces a return <= -100%; lower the noise or weights")

    close = np.empty((T, N))
    close[0] = BASE_PRICE
    for t in range(1, T):
        close[t] = close[t - 1] * (1.0 + r[t - 1])
    gap = rng.normal(0.0, 0.003, size=(T, N))
    opn = np.empty((T, N))
    opn[0] = BASE_PRICE * (1.0 + gap[0])
    opn[1:] = close[:-1] * (1.0 + gap[1:])
    wick_up = np.abs(rng.normal(0.0, 0.005, size=(T, N)))
    wick_dn = np.abs(rng.normal(0.0, 0.005, size=(T, N)))
    high = np.maximum(opn, close) * (1.0 + wick_up)
    low = np.minimum(opn, close) * (1.0 - wick_dn)
    volume = np.round(np.exp(rng.normal(13.0, 0.5, size=(T, N))))

    dates = business_days(spec.start_date, T)
    symbols = tuple(f"S{i:04d}" for i in range(N))
    panel = PricePanel(dates=dates, symbols=symbols, open=opn, high=high, low=low,
                       close=close, volume=volume, suspended=np.zeros((T, N), dtype=bool))
    returns = compute_returns(panel, 1)
    if spec.feature_mode == "latent":
        feats = FeatureMatrix(tuple(f"x_{j + 1}" for j in range(d)), x, dates, symbols, "latent")
    else:
        feats = build_features(panel)
    return SyntheticMarket(panel, feats, returns, w, b, x, eps, spec)


def oracle_mse(market: SyntheticMarket, predictions: np.ndarray, days) -> tuple[float, float]:
    """MSE of ``predictions[len(days) x stocks]`` against realised returns.

    Returns ``(mse, bayes_floor)`` where the floor is ``noise_std ** 2``.
    """
    days = np.asarray(list(days), dtype=int)
    pred = np.asarray(predictions, dtype=float)
    if pred.shape != (days.size, market.returns.values.shape[1]):
        raise ValueError(f"predictions shape {pred.shape} is not aligned to {days.size} days x "
                         f"{market.returns.values.shape[1]} stocks")
    return mse(pred, market.returns.values[days]), market.spec.noise_std ** 2


def mse(pred: np.ndarray, actual: np.ndarray) -> float:
    ok = ~(np.isnan(pred) | np.isnan(actual))
    if not ok.any():
        raise ValueError("no overlapping defined predictions and returns")
    diff = pred[ok] - actual[ok]
    return float(np.mean(diff * diff))


def write_truth(market: SyntheticMarket, dest: str | Path) -> None:
    d = market.true_weights.shape[1]
    with Path(dest).open("w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["date", "b"] + [f"w_{j + 1}" for j in range(d)])
        for t, day in enumerate(market.panel.dates):
            wr.writerow([str(day), repr(float(market.true_bias[t]))]
                        + [repr(float(v)) for v in market.true_weights[t]])
