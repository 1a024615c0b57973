"""End-to-end experiment steps shared by the command-line interface."""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backtest as bt
from .config import RunConfig
from .first_order import RidgeConfig, rotation_predictions, static_first_order
from .indicators import FeatureMatrix, build_features, default_specs, read_features
from .market_data import ReturnMatrix, compute_returns, filter_universe, load_panel
from .second_order import TrainConfig, predict_rolling, train
from .synthetic import RegimeSpec, generate, mse

log = logging.getLogger(__name__)


class MissingInputError(FileNotFoundError):
    pass


def regime_spec(cfg: RunConfig) -> RegimeSpec:
    return RegimeSpec(
        pattern=cfg.synth_pattern,
        n_stocks=cfg.synth_n_stocks,
        n_days=cfg.synth_n_days,
        n_features=cfg.synth_n_features,
        noise_std=cfg.synth_noise_std,
        seed=cfg.seed,
        weights=tuple(cfg.synth_weights),
        amplitude=cfg.synth_amplitude,
        period=cfg.synth_period,
        switch_days=tuple(cfg.synth_switch_days),
        weight_sets=tuple(tuple(w) for w in cfg.synth_weight_sets),
        step_std=cfg.synth_step_std,
        bias=cfg.synth_bias,
        bias_amplitude=cfg.synth_bias_amplitude,
        feature_mode=cfg.synth_feature_mode,
        start_date=cfg.synth_start_date,
    )


def ridge_config(cfg: RunConfig, l2_weight: float | None = None) -> RidgeConfig:
    return RidgeConfig(l2_weight=cfg.l2_weight if l2_weight is None else l2_weight,
                       solver=cfg.ridge_solver)


def train_config(cfg: RunConfig, **overrides) -> TrainConfig:
    kw = dict(episodes=cfg.episodes, learning_rate=cfg.learning_rate, hidden=cfg.hidden,
              forget_bias=cfg.forget_bias, clip_norm=cfg.clip_norm,
              validation_fraction=cfg.validation_fraction, eval_every=cfg.eval_every,
              head=cfg.head, seed=cfg.seed, retrain_daily=cfg.retrain_daily)
    kw.update(overrides)
    return TrainConfig(**kw)


def load_inputs(cfg: RunConfig) -> tuple[FeatureMatrix, ReturnMatrix]:
    """Features and labels from ``features_path`` or, failing that, the price file."""
    if cfg.features_path:
        path = Path(cfg.features_path)
        if not path.exists():
            raise MissingInputError(f"features file not found: {path}")
        return read_features(path)
    if not cfg.data:
        raise MissingInputError("no input: set 'data' (price CSV) or 'features_path'")
    path = Path(cfg.data)
    if not path.exists():
        raise MissingInputError(f"price file not found: {path}")
    panel = filter_universe(load_panel(path), cfg.max_suspension_ratio)
    if panel.n_stocks == 0:
        raise ValueError("no stocks left after the suspension filter")
    feats = build_features(panel, default_specs(cfg.indicator_windows), normalize=cfg.normalize)
    return feats, compute_returns(panel, 1)


@dataclass(frozen=True)
class Split:
    train: tuple[int, int]
    test: tuple[int, int]

    @property
    def test_days(self) -> list[int]:
        return list(range(self.test[0], self.test[1] + 1))


def resolve_split(cfg: RunConfig, dates: np.ndarray) -> Split:
    dates = np.asarray(dates, dtype="datetime64[D]")
    T = dates.size

    def first_on_or_after(s):
        return int(np.searchsorted(dates, np.datetime64(s, "D"), side="left"))

    def last_on_or_before(s):
        return int(np.searchsorted(dates, np.datetime64(s, "D"), side="right")) - 1

    t0 = first_on_or_after(cfg.train_start) if cfg.train_start else 0
    if cfg.train_end:
        t1 = last_on_or_before(cfg.train_end)
    elif cfg.test_start:
        t1 = first_on_or_after(cfg.test_start) - 1
    else:
        t1 = int(T * cfg.train_fraction) - 1
    u0 = first_on_or_after(cfg.test_start) if cfg.test_start else t1 + 1
    u1 = last_on_or_before(cfg.test_end) if cfg.test_end else T - 1
    if not (0 <= t0 <= t1 < u0 <= u1 < T):
        raise ValueError(f"date ranges do not fit the calendar ({dates[0]} .. {dates[-1]})")
    return Split((t0, t1), (u0, u1))


# ---------------------------------------------------------------------------
# methods


def method_predictions(cfg: RunConfig, features, returns, split: Split, methods=None) -> dict:
    """``{method name: predictions[test days x stocks]}`` for the compared methods.

    Names: ``Lin``, ``RoT-w``, ``Sec-s`` (single scale), ``multi-Sec``.
    """
    rc = ridge_config(cfg)
    days = split.test_days
    out = {}
    wanted = set(methods) if methods else None

    def want(name):
        return wanted is None or name in wanted

    if want("Lin"):
        _, out["Lin"] = static_first_order(features, returns, split.train, split.test, rc)
    for w in cfg.rotation_windows:
        if want(f"RoT-{w}"):
            out[f"RoT-{w}"] = rotation_predictions(features, returns, int(w), days, rc)
    tc = train_config(cfg)
    scale_sets = []
    if len(cfg.scales) > 1:
        scale_sets += [(f"Sec-{s}", [int(s)]) for s in cfg.scales]
    scale_sets.append(("multi-Sec", [int(s) for s in cfg.scales]))
    for name, scales in scale_sets:
        if not want(name):
            continue
        res = train(features, returns, scales, cfg.steps, tc, rc, train_days=split.train)
        out[name], _ = predict_rolling(res.model, features, returns, split.test, rc,
                                       series=res.series,
                                       retrain=tc if cfg.retrain_daily else None,
                                       train_start=split.train[0])
    return out


def evaluate(predictions: dict, returns: ReturnMatrix, days, ks) -> tuple[list[dict], dict]:
    """Per-method MSE, AR@K and SHR@K rows, plus backtest reports keyed by (method, k)."""
    actual = returns.values[np.asarray(days)]
    rows, reports = [], {}
    for name, pred in predictions.items():
        row = {"method": name, "MSE": mse(pred, actual)}
        for k in ks:
            rep = bt.simulate(pred, returns, int(k), days)
            reports[(name, int(k))] = rep
            row[f"AR@{k}"] = rep.ar
        for k in ks:
            row[f"SHR@{k}"] = reports[(name, int(k))].shr
        rows.append(row)
    return rows, reports


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_table(rows: list[dict], dest: str | Path) -> None:
    if not rows:
        raise ValueError("empty table")
    cols = list(rows[0])
    with Path(dest).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r[c]) for c in cols])


def equity_curves(reports: dict) -> dict:
    curves = {f"{name}@{k}": (rep.dates, rep.equity) for (name, k), rep in reports.items()}
    if reports:
        last = list(reports.values())[-1]
        curves["market"] = (last.dates, last.baseline)
    return curves


def write_predictions(pred: np.ndarray, features: FeatureMatrix, days, dest: str | Path) -> None:
    with Path(dest).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "symbol", "prediction"])
        for n, t in enumerate(days):
            for i, sym in enumerate(features.symbols):
                if not np.isnan(pred[n, i]):
                    w.writerow([str(features.dates[t]), sym, repr(float(pred[n, i]))])


def read_predictions(src: str | Path, features: FeatureMatrix) -> tuple[np.ndarray, list[int]]:
    path = Path(src)
    if not path.exists():
        raise MissingInputError(f"predictions file not found: {path}")
    di = {str(d): n for n, d in enumerate(features.dates)}
    si = {s: n for n, s in enumerate(features.symbols)}
    cells = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        if next(r, None) != ["date", "symbol", "prediction"]:
            raise ValueError(f"{path}: expected header date,symbol,prediction")
        for lineno, row in enumerate(r, start=2):
            if row[0] not in di or row[1] not in si:
                raise ValueError(f"{path}: line {lineno}: unknown date or symbol")
            cells[(di[row[0]], si[row[1]])] = float(row[2])
    days = sorted({t for t, _ in cells})
    pos = {t: n for n, t in enumerate(days)}
    pred = np.full((len(days), len(features.symbols)), np.nan)
    for (t, i), v in cells.items():
        pred[pos[t], i] = v
    return pred, days


def grid_search(cfg: RunConfig, features, returns, split: Split) -> list[dict]:
    """Validation MSE of multi-Sec for every (steps, forget_bias, hidden, l2) combination."""
    rows = []
    combos = itertools.product(cfg.grid_steps, cfg.grid_forget_bias, cfg.grid_hidden, cfg.grid_l2_weight)
    for steps, fb, hidden, lam in combos:
        tc = train_config(cfg, forget_bias=float(fb), hidden=int(hidden))
        res = train(features, returns, cfg.scales, int(steps), tc, ridge_config(cfg, float(lam)),
                    train_days=split.train)
        val = min(h[2] for h in res.history)
        rows.append({"steps": int(steps), "forget_bias": float(fb), "hidden": int(hidden),
                     "l2_weight": float(lam), "validation_mse": val, "best_episode": res.best_episode})
        log.info("grid steps=%s forget_bias=%s hidden=%s l2=%s -> val MSE %.6g", steps, fb, hidden, lam, val)
    return rows


def synthesize(cfg: RunConfig):
    return generate(regime_spec(cfg))
