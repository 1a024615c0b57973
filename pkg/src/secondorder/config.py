"""Run configuration: a flat YAML mapping plus command-line overrides."""

from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field {field_name!r}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    # inputs / outputs
    data: str | None = None  # price CSV
    features_path: str | None = None  # features CSV (takes precedence over data)
    model_path: str | None = None
    predictions_path: str | None = None
    out: str = "out"
    seed: int = 0
    # date ranges (inclusive, ISO dates); None -> split by train_fraction
    train_start: str | None = None
    train_end: str | None = None
    test_start: str | None = None
    test_end: str | None = None
    train_fraction: float = 0.6
    validation_fraction: float = 0.1
    # data preparation
    max_suspension_ratio: float = 0.1
    normalize: bool = True
    indicator_windows: list = field(default_factory=lambda: [5, 10, 20])
    # first order
    l2_weight: float = 1e-3
    ridge_solver: str = "closed_form"
    rotation_windows: list = field(default_factory=lambda: [5, 20, 60])
    # second order
    scales: list = field(default_factory=lambda: [1, 5, 10, 20])
    steps: int = 4
    hidden: int = 16
    forget_bias: float = 1.0
    learning_rate: float = 0.5
    episodes: int = 1000
    clip_norm: float = 5.0
    eval_every: int = 10
    head: str = "dense"
    retrain_daily: bool = False
    # evaluation
    top_k: list = field(default_factory=lambda: [10, 20, 50])
    svg: bool = True
    # grid search candidates
    grid_steps: list = field(default_factory=lambda: [5, 10, 20])
    grid_forget_bias: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    grid_hidden: list = field(default_factory=lambda: [64, 128])
    grid_l2_weight: list = field(default_factory=lambda: [1e-2, 5e-3, 1e-3])
    # synthetic market
    synth_pattern: str = "sinusoidal"
    synth_n_stocks: int = 20
    synth_n_days: int = 600
    synth_n_features: int = 3
    synth_noise_std: float = 0.012247448713915891
    synth_amplitude: float = 0.01
    synth_period: float = 40.0
    synth_weights: list = field(default_factory=list)
    synth_switch_days: list = field(default_factory=list)
    synth_weight_sets: list = field(default_factory=list)
    synth_step_std: float = 0.001
    synth_bias: float = 0.0
    synth_bias_amplitude: float = 0.0
    synth_feature_mode: str = "latent"
    synth_start_date: str = "2013-01-01"

    def validate(self) -> "RunConfig":
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction", "must lie in (0, 1)")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction", "must lie in (0, 1)")
        if not 0.0 <= self.max_suspension_ratio <= 1.0:
            raise ConfigError("max_suspension_ratio", "must lie in [0, 1]")
        for name in ("scales", "rotation_windows", "top_k", "indicator_windows"):
            vals = getattr(self, name)
            if not vals or any(int(v) < 1 for v in vals):
                raise ConfigError(name, "must be a non-empty list of positive integers")
        for name in ("steps", "hidden", "episodes", "eval_every"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.l2_weight < 0:
            raise ConfigError("l2_weight", "must be >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate", "must be >= 0")
        if self.clip_norm <= 0:
            raise ConfigError("clip_norm", "must be > 0")
        if self.head not in ("dense", "identity"):
            raise ConfigError("head", "must be 'dense' or 'identity'")
        if self.ridge_solver not in ("closed_form", "gradient_descent"):
            raise ConfigError("ridge_solver", "must be 'closed_form' or 'gradient_descent'")
        bounds = [(n, getattr(self, n)) for n in ("train_start", "train_end", "test_start", "test_end")]
        parsed = []
        for name, val in bounds:
            if val is None:
                continue
            try:
                parsed.append((name, _date(val)))
            except ValueError:
                raise ConfigError(name, f"not an ISO date: {val!r}") from None
        for (n1, d1), (n2, d2) in zip(parsed, parsed[1:]):
            strict = n1 == "train_end" and n2 == "test_start"
            if d2 < d1 or (strict and d2 == d1):
                raise ConfigError(n2, f"must come after {n1} ({d1}); ranges must be ordered and disjoint")
        if self.train_end is not None and self.test_start is None and self.test_end is not None:
            if _date(self.test_end) <= _date(self.train_end):
                raise ConfigError("test_end", "test range must follow the train range")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _date(v) -> str:
    return dt.date.fromisoformat(str(v)).isoformat()


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}


def _coerce(name: str, value: Any, default: Any):
    if value is None:
        return None
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise ConfigError(name, f"expected a boolean, got {value!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(name, f"expected a list, got {value!r}")
        return value
    if name.endswith(("_start", "_end", "_date")) and not isinstance(value, str):
        return str(value)
    return value


def build_config(values: dict) -> RunConfig:
    defaults = RunConfig()
    kwargs = {}
    for key, value in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(key, "unknown configuration key")
        kwargs[key] = _coerce(key, value, getattr(defaults, key))
    return RunConfig(**kwargs).validate()


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("<file>", "configuration must be a flat key-value mapping")
        values.update(loaded)
    values.update(overrides or {})
    return build_config(values)


def parse_override(text: str) -> tuple[str, Any]:
    key, sep, raw = text.partition("=")
    if not sep:
        raise ConfigError(text, "override must look like key=value")
    return key.strip(), yaml.safe_load(raw)


def dump_config(cfg: RunConfig, dest: str | Path) -> None:
    Path(dest).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8")
