"""Multi-scale sequential second-order model.

For every scale ``s`` an LSTM reads the ``K`` most recent first-order
parameter vectors sampled ``s`` days apart, ``theta^s_{T-Ks}, ..., theta^s_{T-s}``
(oldest first), starting from a zero state.  The last hidden states are
fused with one learned weight per scale and mapped to a parameter vector by
an affine head::

    v        = sum_s alpha_s * h^s
    theta_T  = out_scale * (C v + beta)          (dense head)
    theta_T  = v                                 (identity head, hidden == d + 1)

``theta_T = (w, b)`` is then applied to the day-``T`` features.  Inputs are
standardised per scale with constants frozen at training time.  Training
minimises the squared error of the resulting return forecast with plain
full-batch gradient descent and exact back-propagation through time.

Per-scale LSTM weights are stored stacked along a leading scale axis with
gate rows in the order input, forget, output, candidate.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .first_order import LinearParams, RidgeConfig, fit_window, param_collect
from .indicators import FeatureMatrix
from .market_data import ReturnMatrix

log = logging.getLogger(__name__)

GATES = ("input", "forget", "output", "cell")
MODEL_MAGIC = "secondorder-model"
MODEL_VERSION = 1


class WindowError(ValueError):
    """A required parameter vector is missing from the look-back window."""


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter {name!r}")
        self.name = name


class DivergenceError(FloatingPointError):
    pass


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmWeights:
    """One scale's LSTM: ``W [4h x p]``, ``U [4h x h]``, ``b [4h]`` with gate blocks i, f, o, c."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.U.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = GATES.index(name)
        h = self.hidden
        sl = slice(k * h, (k + 1) * h)
        return self.W[sl], self.U[sl], self.b[sl]


def lstm_step(weights: LstmWeights, theta_in, state):
    """One LSTM cell update; returns ``(h', c')``.

    ``theta_in`` may be a vector ``[p]`` or a batch ``[B x p]``.
    """
    x = np.asarray(theta_in, dtype=float)
    h_prev, c_prev = (np.asarray(a, dtype=float) for a in state)
    if x.shape[-1] != weights.input_dim:
        raise ValueError(f"input dimension {x.shape[-1]} != {weights.input_dim}")
    if h_prev.shape[-1] != weights.hidden or c_prev.shape[-1] != weights.hidden:
        raise ValueError("state dimension does not match hidden size")
    if not np.isfinite(x).all():
        raise ValueError("non-finite LSTM input")
    z = x @ weights.W.T + h_prev @ weights.U.T + weights.b
    hid = weights.hidden
    i = sigmoid(z[..., :hid])
    f = sigmoid(z[..., hid:2 * hid])
    o = sigmoid(z[..., 2 * hid:3 * hid])
    g = np.tanh(z[..., 3 * hid:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


@dataclass
class SecondOrderModel:
    scales: tuple[int, ...]
    steps: int  # K
    n_features: int
    hidden: int
    W: np.ndarray  # [S x 4h x p]
    U: np.ndarray  # [S x 4h x h]
    b: np.ndarray  # [S x 4h]
    alpha: np.ndarray  # [S]
    head_C: np.ndarray  # [p x h]
    head_beta: np.ndarray  # [p]
    in_shift: np.ndarray = None  # [S x p]
    in_scale: np.ndarray = None  # [S x p]
    out_scale: np.ndarray = None  # [p]
    head: str = "dense"
    seed: int = 0
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        S, p = len(self.scales), self.n_features + 1
        if self.in_shift is None:
            self.in_shift = np.zeros((S, p))
        if self.in_scale is None:
            self.in_scale = np.ones((S, p))
        if self.out_scale is None:
            self.out_scale = np.ones(p)
        if self.alpha.shape != (S,) or self.W.shape[0] != S:
            raise ValueError("per-scale weights and alpha must match the number of scales")
        if self.head_C.shape != (p, self.hidden) or self.head_beta.shape != (p,):
            raise ValueError("head output dimension must equal n_features + 1")
        if self.head == "identity" and self.hidden != p:
            raise ValueError("identity head needs hidden == n_features + 1")

    @property
    def input_dim(self) -> int:
        return self.n_features + 1

    def lstm(self, scale: int) -> LstmWeights:
        k = self.scales.index(scale)
        return LstmWeights(self.W[k], self.U[k], self.b[k])

    def trainable(self) -> dict:
        """Name -> array (live references) of every learned parameter."""
        out = {"lstm.W": self.W, "lstm.U": self.U, "lstm.b": self.b, "alpha": self.alpha}
        if self.head == "dense":
            out["head.C"] = self.head_C
            out["head.beta"] = self.head_beta
        return out

    def copy(self) -> "SecondOrderModel":
        return copy.deepcopy(self)

    @property
    def lookback(self) -> int:
        return self.steps * max(self.scales)


def init_model(scales: Iterable[int], steps: int, n_features: int, hidden: int = 16,
               forget_bias: float = 1.0, seed: int = 0, init_range: float = 0.08,
               head: str = "dense", feature_names: Sequence[str] = ()) -> SecondOrderModel:
    scales = tuple(sorted({int(s) for s in scales}))
    if not scales or scales[0] < 1:
        raise ValueError("scales must be non-empty positive integers")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if head not in ("dense", "identity"):
        raise ValueError("head must be 'dense' or 'identity'")
    S, p, h = len(scales), n_features + 1, hidden
    rng = np.random.default_rng(seed)
    W = rng.uniform(-init_range, init_range, size=(S, 4 * h, p))
    U = rng.uniform(-init_range, init_range, size=(S, 4 * h, h))
    b = np.zeros((S, 4 * h))
    b[:, h:2 * h] = forget_bias
    C = np.zeros((p, h))
    for j in range(min(p, h)):
        C[j, j] = 1.0
    return SecondOrderModel(scales, int(steps), n_features, h, W, U, b,
                            np.full(S, 1.0 / S), C, np.zeros(p), head=head, seed=seed,
                            feature_names=tuple(feature_names))


# ---------------------------------------------------------------------------
# forward / backward on batches of windows


def _run(model: SecondOrderModel, inputs: np.ndarray):
    """Forward pass over ``inputs[S x B x K x p]`` (raw parameters, oldest first)."""
    S, B, K, p = inputs.shape
    hid = model.hidden
    z_in = (inputs - model.in_shift[:, None, None, :]) / model.in_scale[:, None, None, :]
    Wt = model.W.transpose(0, 2, 1)
    Ut = model.U.transpose(0, 2, 1)
    h = np.zeros((S, B, hid))
    c = np.zeros((S, B, hid))
    steps = []
    for k in range(K):
        x = z_in[:, :, k, :]
        z = x @ Wt + h @ Ut + model.b[:, None, :]
        i = sigmoid(z[..., :hid])
        f = sigmoid(z[..., hid:2 * hid])
        o = sigmoid(z[..., 2 * hid:3 * hid])
        g = np.tanh(z[..., 3 * hid:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        steps.append((x, h, c, i, f, o, g, tc))
        h, c = o * tc, c_new
    v = np.einsum("s,sbh->bh", model.alpha, h)
    if model.head == "dense":
        theta = (v @ model.head_C.T + model.head_beta) * model.out_scale
    else:
        theta = v
    return theta, (steps, h, v)


def _backward(model: SecondOrderModel, cache, d_theta: np.ndarray) -> dict:
    steps, h_last, v = cache
    grads = {}
    if model.head == "dense":
        g_out = d_theta * model.out_scale
        grads["head.beta"] = g_out.sum(axis=0)
        grads["head.C"] = g_out.T @ v
        dv = g_out @ model.head_C
    else:
        dv = d_theta
    grads["alpha"] = np.einsum("bh,sbh->s", dv, h_last)
    dh = model.alpha[:, None, None] * dv[None]
    dc = np.zeros_like(dh)
    dW = np.zeros_like(model.W)
    dU = np.zeros_like(model.U)
    db = np.zeros_like(model.b)
    for x, h_prev, c_prev, i, f, o, g, tc in reversed(steps):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            do * o * (1.0 - o),
            dg * (1.0 - g * g),
        ], axis=-1)
        dW += dz.transpose(0, 2, 1) @ x
        dU += dz.transpose(0, 2, 1) @ h_prev
        db += dz.sum(axis=1)
        dh = dz @ model.U
        dc = dc * f
    grads["lstm.W"] = dW
    grads["lstm.U"] = dU
    grads["lstm.b"] = db
    return grads


def _stack_window(model: SecondOrderModel, window) -> np.ndarray:
    """``{scale: [K x p]}`` -> ``[S x 1 x K x p]`` with validation."""
    arrs = []
    for s in model.scales:
        if s not in window:
            raise WindowError(f"window has no sequence for scale {s}")
        a = np.asarray(window[s], dtype=float)
        if a.shape != (model.steps, model.input_dim):
            raise WindowError(f"scale {s}: expected {model.steps} x {model.input_dim} parameters, got {a.shape}")
        if not np.isfinite(a).all():
            raise WindowError(f"scale {s}: missing parameter entries in window")
        arrs.append(a)
    return np.stack(arrs)[:, None]


def forward(model: SecondOrderModel, window, x_T):
    """Predicted parameters for day ``T`` and the forecast they give for ``x_T``.

    ``window`` maps each scale to its ``[K x (d + 1)]`` parameter sequence,
    oldest first.  ``x_T`` is one feature vector or a ``[stocks x d]`` matrix.
    Returns ``(LinearParams, y_hat)``.
    """
    theta, _ = _run(model, _stack_window(model, window))
    params = LinearParams.from_vector(theta[0])
    x = np.asarray(x_T, dtype=float)
    if x.shape[-1] != model.n_features:
        raise ValueError(f"feature dimension {x.shape[-1]} != {model.n_features}")
    y = x @ params.w + params.b
    return params, (float(y) if np.ndim(y) == 0 else y)


def gradients(model: SecondOrderModel, window, x_T, y_T) -> dict:
    """Exact gradient of ``sum_i (y_hat_i - y_i)^2`` for one window.

    ``x_T``/``y_T`` may hold one stock or a cross-section sharing the
    window.  Returns ``{name: array}`` shaped like ``model.trainable()``
    plus ``"loss"``.
    """
    inputs = _stack_window(model, window)
    x = np.atleast_2d(np.asarray(x_T, dtype=float))
    y = np.atleast_1d(np.asarray(y_T, dtype=float))
    theta, cache = _run(model, inputs)
    resid = x @ theta[0, :-1] + theta[0, -1] - y
    d_theta = np.append(2.0 * resid @ x, 2.0 * resid.sum())[None, :]
    grads = _backward(model, cache, d_theta)
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradientError(name)
    grads["loss"] = float(resid @ resid)
    return grads


# ---------------------------------------------------------------------------
# training data


def window_days(series: dict, scale: int, steps: int, day: int) -> list[int]:
    return [day - k * scale for k in range(steps, 0, -1)]


def assemble_window(series: dict, scales: Sequence[int], steps: int, day: int) -> dict:
    """``{s: [K x p]}`` for the prediction of ``day``; raises WindowError if incomplete."""
    out = {}
    for s in scales:
        rows = []
        for t in window_days(series, s, steps, day):
            v = series[s].get(t)
            if v is None:
                raise WindowError(f"scale {s}: parameters for day {t} unavailable (predicting day {day})")
            rows.append(v)
        out[s] = np.array(rows)
    return out


@dataclass
class WindowBatch:
    days: np.ndarray  # [B]
    inputs: np.ndarray  # [S x B x K x p]
    X: np.ndarray  # [B x N x d], NaN replaced by 0
    y: np.ndarray  # [B x N], NaN replaced by 0
    usable: np.ndarray  # [B x N] sample has features and label


def build_batch(series: dict, scales: Sequence[int], steps: int, features: FeatureMatrix,
                returns: ReturnMatrix | None, days: Iterable[int]) -> WindowBatch:
    """Stack every day in ``days`` whose windows are complete."""
    kept, wins = [], []
    for t in days:
        try:
            w = assemble_window(series, scales, steps, t)
        except WindowError:
            continue
        kept.append(t)
        wins.append(np.stack([w[s] for s in scales]))
    if not kept:
        raise WindowError("no day has a complete look-back window; history too short")
    kept = np.array(kept, dtype=int)
    inputs = np.stack(wins, axis=1)
    X = features.values[kept]
    ok = ~np.isnan(X).any(axis=2)
    if returns is not None:
        y = returns.values[kept]
        ok &= ~np.isnan(y)
        y = np.where(ok, y, 0.0)
    else:
        y = np.zeros(ok.shape)
    return WindowBatch(kept, inputs, np.where(ok[..., None], X, 0.0), y, ok)


def batch_predictions(model: SecondOrderModel, batch: WindowBatch) -> tuple[np.ndarray, np.ndarray]:
    theta, _ = _run(model, batch.inputs)
    pred = np.einsum("bnd,bd->bn", batch.X, theta[:, :-1]) + theta[:, -1:]
    return pred, theta


def _objective(model: SecondOrderModel, batch: WindowBatch, weight: np.ndarray):
    """``sum(weight * (y_hat - y)^2)`` and its gradients."""
    theta, cache = _run(model, batch.inputs)
    pred = np.einsum("bnd,bd->bn", batch.X, theta[:, :-1]) + theta[:, -1:]
    r = (pred - batch.y) * weight
    loss = float(np.sum(r * (pred - batch.y)))
    d_theta = np.concatenate([2.0 * np.einsum("bn,bnd->bd", r, batch.X),
                              2.0 * r.sum(axis=1, keepdims=True)], axis=1)
    return loss, _backward(model, cache, d_theta)


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 1500
    learning_rate: float = 0.5
    hidden: int = 16
    forget_bias: float = 1.0
    clip_norm: float = 5.0
    tolerance: float = 1e-10
    validation_fraction: float = 0.1
    eval_every: int = 10
    init_range: float = 0.08
    head: str = "dense"
    seed: int = 0
    retrain_daily: bool = False
    retrain_episodes: int = 20

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass
class TrainResult:
    model: SecondOrderModel
    series: dict
    history: list = field(default_factory=list)  # (episode, train_mse, val_mse)
    best_episode: int = 0


def validation_mask(shape, fraction: float, seed: int) -> np.ndarray:
    """Seeded random ``(day, stock)`` hold-out mask."""
    if fraction <= 0:
        return np.zeros(shape, dtype=bool)
    rng = np.random.default_rng([int(seed), 7919])
    return rng.random(shape) < fraction


def standardisation(series: dict, scales: Sequence[int], last_day: int):
    """Per-scale shift/scale of the inputs, and the pooled output spread and centre."""
    shifts, spreads, pooled = [], [], []
    for s in scales:
        m = np.array([series[s].get(t) for t in series[s].days if t <= last_day])
        if m.size == 0:
            raise WindowError(f"no collected parameters for scale {s}")
        pooled.append(m)
        shifts.append(m.mean(axis=0))
        sd = m.std(axis=0)
        spreads.append(np.where(sd > 1e-12, sd, 1.0))
    allm = np.vstack(pooled)
    out_sd = allm.std(axis=0)
    return np.array(shifts), np.array(spreads), np.where(out_sd > 1e-12, out_sd, 1.0), allm.mean(axis=0)


def _descend(model: SecondOrderModel, batch: WindowBatch, train_w: np.ndarray,
             val_mask: np.ndarray | None, cfg: TrainConfig, episodes: int, history: list | None = None):
    """Plain gradient descent with global-norm clipping; keeps the best-validation weights."""
    n_train = max(train_w.sum(), 1.0)
    var_y = float(np.sum(train_w * (batch.y - np.sum(train_w * batch.y) / n_train) ** 2) / n_train)
    var_y = var_y if var_y > 0 else 1.0
    # loss normalised by the label variance so one learning rate fits any return scale
    weight = train_w / (n_train * var_y)
    params = model.trainable()
    best = model.copy()
    best_score, best_ep = np.inf, 0
    n_val = val_mask.sum() if val_mask is not None else 0

    def score():
        pred, _ = batch_predictions(model, batch)
        err = (pred - batch.y) ** 2
        tr = float(np.sum(err * train_w) / n_train)
        va = float(err[val_mask].mean()) if n_val else tr
        return tr, va

    for ep in range(episodes + 1):
        if ep % cfg.eval_every == 0 or ep == episodes:
            tr, va = score()
            if not np.isfinite(tr):
                raise DivergenceError(f"non-finite training loss at episode {ep}")
            if history is not None:
                history.append((ep, tr, va))
            if va < best_score:
                best_score, best_ep = va, ep
                best = model.copy()
        if ep == episodes:
            break
        loss, grads = _objective(model, batch, weight)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite training loss at episode {ep}")
        for name, g in grads.items():
            if not np.isfinite(g).all():
                raise NonFiniteGradientError(name)
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if norm < cfg.tolerance:
            break
        factor = cfg.learning_rate * min(1.0, cfg.clip_norm / norm)
        for name, p in params.items():
            p -= factor * grads[name]
    return best, best_ep


def train(features: FeatureMatrix, returns: ReturnMatrix, scales: Iterable[int], steps: int,
          cfg: TrainConfig = TrainConfig(), ridge_cfg: RidgeConfig = RidgeConfig(),
          train_days: tuple[int, int] | None = None, series: dict | None = None) -> TrainResult:
    """Fit the second-order model on forecasts of days ``train_days`` (inclusive).

    Parameters are collected with ``param_collect`` from data strictly before
    the last training day; a training day contributes once all its windows
    are complete.
    """
    scales = tuple(sorted({int(s) for s in scales}))
    T = features.values.shape[0]
    t0, t1 = train_days if train_days is not None else (0, T - 1)
    if not 0 <= t0 <= t1 < T:
        raise ValueError("invalid training range")
    if series is None:
        series = param_collect(features, returns, scales, ridge_cfg, days=range(0, t1))
    batch_days = list(range(max(t0, steps * max(scales)), t1 + 1))
    if not batch_days:
        raise WindowError(f"training range too short for look-back {steps * max(scales)}")
    batch = build_batch(series, scales, steps, features, returns, batch_days)

    model = init_model(scales, steps, features.n_features, cfg.hidden, cfg.forget_bias,
                       cfg.seed, cfg.init_range, cfg.head, features.names)
    shifts, spreads, out_sd, centre = standardisation(series, scales, t1 - 1)
    model.in_shift, model.in_scale = shifts, spreads
    if cfg.head == "dense":
        model.out_scale = out_sd
        model.head_beta = centre / out_sd

    held = validation_mask(batch.usable.shape, cfg.validation_fraction, cfg.seed) & batch.usable
    train_w = (batch.usable & ~held).astype(float)
    history: list = []
    best, best_ep = _descend(model, batch, train_w, held if held.any() else None, cfg,
                             cfg.episodes, history)
    log.info("trained scales=%s K=%d: best episode %d of %d", scales, steps, best_ep, cfg.episodes)
    return TrainResult(best, series, history, best_ep)


def _ensure(series: dict, features, returns, ridge_cfg, day: int) -> None:
    for s, ser in series.items():
        if day not in ser and day - s + 1 >= 0:
            p = fit_window(features, returns, day - s + 1, day, ridge_cfg)
            if p is not None:
                ser.add(day, p)


def predict_rolling(model: SecondOrderModel, features: FeatureMatrix, returns: ReturnMatrix,
                    test_days: tuple[int, int], ridge_cfg: RidgeConfig = RidgeConfig(),
                    series: dict | None = None, retrain: TrainConfig | None = None,
                    train_start: int = 0):
    """Forecast each day of ``test_days`` (inclusive), refreshing parameters daily.

    Before day ``t`` only parameters stamped ``< t`` are read.  After the
    forecast, ``theta_t^s`` is fitted and appended for every scale.  The
    model weights stay fixed unless ``retrain`` is given, in which case they
    are fine-tuned on all windows up to ``t - 1`` before each forecast.

    Returns ``(predictions[n_days x n_stocks], series)``.
    """
    u0, u1 = test_days
    if u1 < u0:
        raise ValueError("empty test range")
    if series is None:
        series = param_collect(features, returns, model.scales, ridge_cfg, days=range(0, u0))
    else:
        series = {s: series[s].copy() for s in model.scales}
    preds = np.full((u1 - u0 + 1, features.values.shape[1]), np.nan)
    for n, t in enumerate(range(u0, u1 + 1)):
        for s in model.scales:
            for tau in window_days(series, s, model.steps, t):
                if tau < t:
                    _ensure({s: series[s]}, features, returns, ridge_cfg, tau)
        if retrain is not None and t > u0:
            days = range(max(train_start, model.lookback), t)
            batch = build_batch(series, model.scales, model.steps, features, returns, days)
            model, _ = _descend(model.copy(), batch, batch.usable.astype(float), None, retrain,
                                retrain.retrain_episodes)
        window = assemble_window(series, model.scales, model.steps, t)
        theta, _ = _run(model, _stack_window(model, window))
        preds[n] = features.values[t] @ theta[0, :-1] + theta[0, -1]
        _ensure(series, features, returns, ridge_cfg, t)
    return preds, series


# ---------------------------------------------------------------------------
# serialisation


def _array_block(name: str, a: np.ndarray) -> list[str]:
    a = np.asarray(a, dtype=float)
    lines = [f"[{name}] " + " ".join(str(n) for n in a.shape)]
    flat = a.reshape(-1, a.shape[-1]) if a.ndim > 1 else a.reshape(1, -1)
    for row in flat:
        lines.append(" ".join(repr(float(v)) for v in row))
    return lines


ARRAYS = ("W", "U", "b", "alpha", "head_C", "head_beta", "in_shift", "in_scale", "out_scale")


def save_model(model: SecondOrderModel, dest: str | Path) -> None:
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        "scales " + " ".join(str(s) for s in model.scales),
        f"steps {model.steps}",
        f"n_features {model.n_features}",
        f"hidden {model.hidden}",
        f"head {model.head}",
        f"seed {model.seed}",
        "features " + " ".join(model.feature_names),
    ]
    for name in ARRAYS:
        lines.extend(_array_block(name, getattr(model, name)))
    Path(dest).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(src: str | Path) -> SecondOrderModel:
    lines = Path(src).read_text(encoding="utf-8").splitlines()
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != MODEL_MAGIC:
        raise ValueError(f"{src}: not a second-order model file")
    if int(magic[1]) != MODEL_VERSION:
        raise ValueError(f"{src}: unsupported model version {magic[1]}")
    header, arrays, i = {}, {}, 1
    while i < len(lines) and not lines[i].startswith("["):
        key, _, val = lines[i].partition(" ")
        header[key] = val
        i += 1
    while i < len(lines):
        name, _, shape_s = lines[i][1:].partition("] ")
        shape = tuple(int(x) for x in shape_s.split())
        rows = int(np.prod(shape[:-1])) if len(shape) > 1 else 1
        data = [float(v) for ln in lines[i + 1:i + 1 + rows] for v in ln.split()]
        arrays[name] = np.array(data, dtype=float).reshape(shape)
        i += 1 + rows
    return SecondOrderModel(
        scales=tuple(int(s) for s in header["scales"].split()),
        steps=int(header["steps"]),
        n_features=int(header["n_features"]),
        hidden=int(header["hidden"]),
        head=header["head"],
        seed=int(header["seed"]),
        feature_names=tuple(header.get("features", "").split()),
        **arrays,
    )
