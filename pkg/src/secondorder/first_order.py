"""Windowed ridge-regularised linear models and the first-order baselines.

A single market-wide linear model is fitted per window by pooling every
(day, stock) sample inside it.  ``theta_t^s`` is stamped with the last
feature day ``t`` of its window ``[t - s + 1, t]``; its labels are the
forward returns of those same days, i.e. they reach the close of ``t + 1``.
Prediction sites are responsible for the one-day lag that implies.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .indicators import FeatureMatrix
from .market_data import ReturnMatrix


class RankDeficientError(np.linalg.LinAlgError):
    pass


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class RidgeConfig:
    l2_weight: float = 1e-3
    solver: str = "closed_form"  # or "gradient_descent"
    learning_rate: float | None = None  # None: 1 / Lipschitz constant of the loss
    episodes: int = 20000
    tolerance: float = 1e-12

    def __post_init__(self):
        if self.l2_weight < 0:
            raise ValueError("l2_weight must be >= 0")
        if self.solver not in ("closed_form", "gradient_descent"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class LinearParams:
    w: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).reshape(-1))
        object.__setattr__(self, "b", float(self.b))

    def vector(self) -> np.ndarray:
        """``[w_1, ..., w_d, b]``."""
        return np.append(self.w, self.b)

    @classmethod
    def from_vector(cls, v) -> "LinearParams":
        v = np.asarray(v, dtype=float)
        return cls(v[:-1], v[-1])


def _ridge_loss(X, y, w, b, lam):
    r = X @ w + b - y
    return float(np.mean(r * r) + lam * np.dot(w, w))


def fit_ridge(X, y, cfg: RidgeConfig = RidgeConfig(), trace: list | None = None) -> LinearParams:
    """Minimise ``mean((Xw + b - y)^2) + l2 * ||w||^2`` with the bias unpenalised.

    If ``trace`` is a list, the gradient-descent solver appends the loss
    before every update (plus the final loss).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be [n x d] with n matching y")
    n, d = X.shape
    if n < 1:
        raise ValueError("need at least one sample")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("undefined entries in X or y; drop missing samples first")
    lam = cfg.l2_weight

    if cfg.solver == "closed_form":
        xm = X.mean(axis=0)
        ym = y.mean()
        Xc = X - xm
        if d == 0:
            return LinearParams(np.zeros(0), ym)
        if lam == 0.0 and np.linalg.matrix_rank(Xc) < d:
            raise RankDeficientError("normal equations are singular with l2_weight = 0")
        A = Xc.T @ Xc / n + lam * np.eye(d)
        w = np.linalg.solve(A, Xc.T @ (y - ym) / n)
        return LinearParams(w, ym - xm @ w)

    lr = cfg.learning_rate
    if lr is None:
        Xa = np.hstack([X, np.ones((n, 1))])
        top = np.linalg.eigvalsh(Xa.T @ Xa / n)[-1]
        lr = 1.0 / (2.0 * (top + lam))
    w = np.zeros(d)
    b = 0.0
    for _ in range(cfg.episodes):
        r = X @ w + b - y
        loss = float(np.mean(r * r) + lam * np.dot(w, w))
        if not np.isfinite(loss):
            raise DivergenceError("ridge gradient descent diverged (non-finite loss)")
        if trace is not None:
            trace.append(loss)
        gw = 2.0 * (X.T @ r) / n + 2.0 * lam * w
        gb = 2.0 * r.mean()
        if np.sqrt(np.dot(gw, gw) + gb * gb) < cfg.tolerance:
            break
        w = w - lr * gw
        b = b - lr * gb
    loss = _ridge_loss(X, y, w, b, lam)
    if not np.isfinite(loss):
        raise DivergenceError("ridge gradient descent diverged (non-finite loss)")
    if trace is not None:
        trace.append(loss)
    return LinearParams(w, b)


def predict_linear(params: LinearParams, x) -> np.ndarray | float:
    """``w . x + b`` for one feature vector or each row of a matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.w.size:
        raise ValueError(f"feature dimension {x.shape[-1]} != parameter dimension {params.w.size}")
    out = x @ params.w + params.b
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ParamSeries:
    """Fitted parameters of one scale keyed by the window's last feature day."""

    scale: int
    n_features: int
    entries: dict = field(default_factory=dict)

    def add(self, day: int, params: LinearParams) -> None:
        if params.w.size != self.n_features:
            raise ValueError("parameter dimension mismatch")
        self.entries[int(day)] = params.vector()

    def get(self, day: int) -> np.ndarray | None:
        return self.entries.get(int(day))

    def __contains__(self, day) -> bool:
        return int(day) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def days(self) -> list[int]:
        return sorted(self.entries)

    def matrix(self) -> np.ndarray:
        """Entries stacked in day order, ``[n_entries x (d + 1)]``."""
        return np.array([self.entries[t] for t in self.days]).reshape(-1, self.n_features + 1)

    def copy(self) -> "ParamSeries":
        return ParamSeries(self.scale, self.n_features, dict(self.entries))


def window_samples(features: FeatureMatrix, returns: ReturnMatrix, start: int, end: int):
    """Pooled ``(X, y)`` over feature days ``start..end`` with both sides defined."""
    start = max(start, 0)
    vals = features.values[start:end + 1]
    X = vals.reshape(-1, vals.shape[2])
    y = returns.values[start:end + 1].reshape(-1)
    ok = ~(np.isnan(X).any(axis=1) | np.isnan(y))
    return X[ok], y[ok]


def fit_window(features, returns, start: int, end: int, cfg: RidgeConfig) -> LinearParams | None:
    X, y = window_samples(features, returns, start, end)
    if y.size == 0:
        return None
    return fit_ridge(X, y, cfg)


def _check_aligned(features: FeatureMatrix, returns: ReturnMatrix) -> None:
    if features.symbols != returns.symbols or not np.array_equal(features.dates, returns.dates):
        raise ValueError("features and returns are not aligned on the same calendar and stocks")


def param_collect(features: FeatureMatrix, returns: ReturnMatrix, scales: Iterable[int],
                  cfg: RidgeConfig = RidgeConfig(), days: Iterable[int] | None = None) -> dict:
    """Fit ``theta_t^s`` for every scale and every day with a full window.

    Returns ``{s: ParamSeries}``.  Days whose window holds no defined sample
    are skipped.
    """
    _check_aligned(features, returns)
    scales = sorted({int(s) for s in scales})
    if not scales:
        raise ValueError("scales must be non-empty")
    if scales[0] < 1:
        raise ValueError("scales must be >= 1")
    T = features.values.shape[0]
    days = range(T) if days is None else sorted({int(t) for t in days})
    out = {}
    for s in scales:
        series = ParamSeries(s, features.n_features)
        for t in days:
            if t - s + 1 < 0 or t >= T:
                continue
            p = fit_window(features, returns, t - s + 1, t, cfg)
            if p is not None:
                series.add(t, p)
        out[s] = series
    return out


def rotation_predict(features: FeatureMatrix, returns: ReturnMatrix, window: int, day: int,
                     cfg: RidgeConfig = RidgeConfig()) -> np.ndarray:
    """Per-stock forecast of day ``day``'s forward return from ``theta_{day-1}^window``."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if day - window < 0:
        raise ValueError(f"insufficient history for window {window} at day {day}")
    p = fit_window(features, returns, day - window, day - 1, cfg)
    if p is None:
        raise ValueError(f"no defined samples in window ending at day {day - 1}")
    return features.values[day] @ p.w + p.b


def rotation_predictions(features, returns, window: int, days: Sequence[int],
                         cfg: RidgeConfig = RidgeConfig()) -> np.ndarray:
    return np.vstack([rotation_predict(features, returns, window, t, cfg) for t in days])


def static_first_order(features: FeatureMatrix, returns: ReturnMatrix, train_days: tuple[int, int],
                       test_days: tuple[int, int], cfg: RidgeConfig = RidgeConfig()):
    """One fit over ``train_days`` (inclusive), applied unchanged to each test day.

    Returns ``(params, predictions[n_test_days x n_stocks])``.
    """
    _check_aligned(features, returns)
    t0, t1 = train_days
    u0, u1 = test_days
    if t1 < t0:
        raise ValueError("empty train range")
    if u1 < u0:
        raise ValueError("empty test range")
    if u0 <= t1:
        raise ValueError("test range must start after the train range")
    p = fit_window(features, returns, t0, t1, cfg)
    if p is None:
        raise ValueError("no defined samples in train range")
    preds = features.values[u0:u1 + 1] @ p.w + p.b
    return p, preds


def write_param_series(series: dict, dates: np.ndarray, dest: str | Path) -> None:
    """CSV ``scale,date,b,w_1,...,w_d`` ordered by (scale, date)."""
    scales = sorted(series)
    if not scales:
        raise ValueError("no parameter series")
    d = series[scales[0]].n_features
    with Path(dest).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scale", "date", "b"] + [f"w_{j + 1}" for j in range(d)])
        for s in scales:
            for t in series[s].days:
                v = series[s].get(t)
                w.writerow([s, str(dates[t]), repr(float(v[-1]))] + [repr(float(x)) for x in v[:-1]])


def read_param_series(src: str | Path, dates: np.ndarray) -> dict:
    index = {str(d): n for n, d in enumerate(dates)}
    out = {}
    with Path(src).open("r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        d = len(header) - 3
        for row in r:
            s = int(row[0])
            v = np.array([float(x) for x in row[3:]] + [float(row[2])])
            out.setdefault(s, ParamSeries(s, d)).add(index[row[1]], LinearParams.from_vector(v))
    return out
