"""Command-line entry point: ``secondorder <command> [--config F] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys
import time
from pathlib import Path

import yaml

from . import backtest as bt
from . import pipeline as pl
from .config import ConfigError, RunConfig, dump_config, load_config, parse_override
from .first_order import param_collect, write_param_series
from .indicators import write_features
from .market_data import save_panel
from .second_order import load_model, predict_rolling, save_model, train
from .synthetic import write_truth

log = logging.getLogger("secondorder")

COMMANDS = ("synth", "features", "collect", "train", "predict", "backtest", "report", "grid")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="secondorder",
                                description="Second-order parameter forecasting for stock prediction.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="flat YAML key-value file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve(args) -> RunConfig:
    overrides = dict(parse_override(o) for o in args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = str(args.out)
    return load_config(args.config, overrides)


# each command returns the list of files it wrote


def cmd_synth(cfg: RunConfig, out: Path) -> list[Path]:
    market = pl.synthesize(cfg)
    files = [out / "prices.csv", out / "truth.csv", out / "features.csv"]
    save_panel(market.panel, files[0])
    write_truth(market, files[1])
    write_features(market.features, market.returns, files[2])
    return files


def cmd_features(cfg, out):
    feats, rets = pl.load_inputs(cfg)
    write_features(feats, rets, out / "features.csv")
    return [out / "features.csv"]


def cmd_collect(cfg, out):
    feats, rets = pl.load_inputs(cfg)
    series = param_collect(feats, rets, cfg.scales, pl.ridge_config(cfg))
    dest = out / "params.csv"
    write_param_series(series, feats.dates, dest)
    return [dest]


def cmd_train(cfg, out):
    feats, rets = pl.load_inputs(cfg)
    split = pl.resolve_split(cfg, feats.dates)
    res = train(feats, rets, cfg.scales, cfg.steps, pl.train_config(cfg), pl.ridge_config(cfg),
                train_days=split.train)
    model_path = out / "model.txt"
    save_model(res.model, model_path)
    hist = out / "train_history.csv"
    with hist.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "train_mse", "validation_mse"])
        for ep, tr, va in res.history:
            w.writerow([ep, repr(float(tr)), repr(float(va))])
    log.info("best episode %d", res.best_episode)
    return [model_path, hist]


def cmd_predict(cfg, out):
    feats, rets = pl.load_inputs(cfg)
    split = pl.resolve_split(cfg, feats.dates)
    src = Path(cfg.model_path) if cfg.model_path else out / "model.txt"
    if not src.exists():
        raise pl.MissingInputError(f"model file not found: {src} (run 'train' or set model_path)")
    model = load_model(src)
    if model.n_features != feats.n_features:
        raise ValueError(f"model expects {model.n_features} features, input has {feats.n_features}")
    retrain = pl.train_config(cfg) if cfg.retrain_daily else None
    preds, _ = predict_rolling(model, feats, rets, split.test, pl.ridge_config(cfg),
                               retrain=retrain, train_start=split.train[0])
    dest = out / "predictions.csv"
    pl.write_predictions(preds, feats, split.test_days, dest)
    return [dest]


def cmd_backtest(cfg, out):
    feats, rets = pl.load_inputs(cfg)
    src = Path(cfg.predictions_path) if cfg.predictions_path else out / "predictions.csv"
    preds, days = pl.read_predictions(src, feats)
    metrics, curves = {}, {}
    for k in cfg.top_k:
        rep = bt.simulate(preds, rets, int(k), days)
        metrics.update(rep.metrics())
        curves[f"top{k}"] = (rep.dates, rep.equity)
        curves["market"] = (rep.dates, rep.baseline)
    files = [out / "report.csv", out / "equity.csv"]
    bt.write_metrics_csv(metrics, files[0])
    bt.write_equity_csv(curves, files[1])
    if cfg.svg:
        files.append(out / "equity.svg")
        bt.plot_equity_svg(curves, files[-1])
    return files


def cmd_report(cfg, out):
    feats, rets = pl.load_inputs(cfg)
    split = pl.resolve_split(cfg, feats.dates)
    preds = pl.method_predictions(cfg, feats, rets, split)
    rows, reports = pl.evaluate(preds, rets, split.test_days, cfg.top_k)
    files = [out / "comparison.csv", out / "equity.csv"]
    pl.write_table(rows, files[0])
    curves = pl.equity_curves(reports)
    bt.write_equity_csv(curves, files[1])
    if cfg.svg:
        files.append(out / "equity.svg")
        bt.plot_equity_svg(curves, files[-1], title="Cumulative wealth by method")
    for r in rows:
        log.info("%-10s MSE %.6g  %s", r["method"], r["MSE"],
                 "  ".join(f"{k} {v:.4f}" for k, v in r.items() if k.startswith("AR@")))
    return files


def cmd_grid(cfg, out):
    feats, rets = pl.load_inputs(cfg)
    split = pl.resolve_split(cfg, feats.dates)
    rows = pl.grid_search(cfg, feats, rets, split)
    files = [out / "grid.csv", out / "config.best.yaml"]
    pl.write_table(rows, files[0])
    best = min(rows, key=lambda r: r["validation_mse"])
    chosen = cfg.to_dict()
    chosen.update(steps=best["steps"], forget_bias=best["forget_bias"], hidden=best["hidden"],
                  l2_weight=best["l2_weight"])
    files[1].write_text(yaml.safe_dump(chosen, sort_keys=True), encoding="utf-8")
    return files


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run_pipeline(cfg: RunConfig, command: str) -> list[Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("resolved config:\n%s", yaml.safe_dump(cfg.to_dict(), sort_keys=True).rstrip())
    dump_config(cfg, out / "config.resolved.yaml")
    started = time.time()
    files = HANDLERS[command](cfg, out)
    meta = {
        "command": command,
        "started": dt.datetime.fromtimestamp(started, dt.timezone.utc).isoformat(),
        "seconds": round(time.time() - started, 3),
        "outputs": [p.name for p in files],
    }
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return files


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except (OSError, yaml.YAMLError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        files = run_pipeline(cfg, args.command)
    except pl.MissingInputError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 3
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
