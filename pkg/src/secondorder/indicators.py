"""Candlestick and trend indicators, feature stacking and Information Coefficient."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .market_data import PricePanel, ReturnMatrix, compute_returns

CANDLE_KINDS = ("KLEN", "KUP", "KLOW")
TREND_KINDS = ("MA", "EMA", "BIAS", "ROC")
PRICE_KINDS = ("OPEN", "HIGH", "LOW", "CLOSE")
ALL_KINDS = PRICE_KINDS + CANDLE_KINDS + TREND_KINDS
DEFAULT_WINDOWS = (5, 10, 20)


class UndefinedICError(ValueError):
    """Too few defined pairs, or a constant vector, for a correlation."""


@dataclass(frozen=True)
class IndicatorSpec:
    kind: str
    window: int | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in ALL_KINDS:
            raise ValueError(f"unknown indicator kind {self.kind!r}")
        if kind in TREND_KINDS:
            if self.window is None or int(self.window) < 1:
                raise ValueError(f"{kind} needs a window >= 1")
            object.__setattr__(self, "window", int(self.window))
        else:
            object.__setattr__(self, "window", None)

    @property
    def name(self) -> str:
        return self.kind if self.window is None else f"{self.kind}_{self.window}"

    @classmethod
    def parse(cls, name: str) -> "IndicatorSpec":
        kind, _, win = name.partition("_")
        return cls(kind, int(win) if win else None)


def default_specs(windows: Sequence[int] = DEFAULT_WINDOWS) -> list[IndicatorSpec]:
    """Four raw prices, the three candlestick shapes, and each trend indicator per window."""
    specs = [IndicatorSpec(k) for k in PRICE_KINDS + CANDLE_KINDS]
    for kind in TREND_KINDS:
        specs.extend(IndicatorSpec(kind, m) for m in windows)
    return specs


def _rolling_mean(close: np.ndarray, m: int) -> np.ndarray:
    # per-window sums; a NaN anywhere in the trailing m rows propagates
    out = np.full(close.shape, np.nan)
    if m > close.shape[0]:
        return out
    out[m - 1:] = sliding_window_view(close, m, axis=0).mean(axis=-1)
    return out


def _ema(close: np.ndarray, m: int) -> np.ndarray:
    # Seeded at the first defined close; a gap reseeds the recursion.
    k = 2.0 / (m + 1)
    out = np.full(close.shape, np.nan)
    prev = np.full(close.shape[1], np.nan)
    for t in range(close.shape[0]):
        c = close[t]
        cur = (c - prev) * k + prev
        seed = np.isnan(prev)
        cur[seed] = c[seed]
        out[t] = cur
        prev = cur
    return out


def compute_indicator(spec: IndicatorSpec, panel: PricePanel) -> np.ndarray:
    """Per-(day, stock) indicator values; NaN where inputs are missing."""
    if panel.n_days == 0 or panel.n_stocks == 0:
        raise ValueError("empty panel")
    if not isinstance(spec, IndicatorSpec):
        spec = IndicatorSpec.parse(str(spec))
    kind, m = spec.kind, spec.window
    close = panel.price("close")
    if kind in PRICE_KINDS:
        return panel.price(kind.lower())
    if kind in CANDLE_KINDS:
        o, h, lo = panel.price("open"), panel.price("high"), panel.price("low")
        if kind == "KLEN":
            return (close - o) / o
        if kind == "KUP":
            return (h - np.maximum(o, close)) / o
        return (np.minimum(o, close) - lo) / o
    if kind == "MA":
        return _rolling_mean(close, m)
    if kind == "EMA":
        return _ema(close, m)
    if kind == "BIAS":
        return close - _rolling_mean(close, m)
    if kind == "ROC":
        out = np.full(close.shape, np.nan)
        if m < close.shape[0]:
            out[m:] = (close[m:] - close[:-m]) / close[:-m]
        return out
    raise ValueError(f"unknown indicator kind {kind!r}")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Indicator tensor ``values[day, stock, indicator]`` with NaN for undefined."""

    names: tuple[str, ...]
    values: np.ndarray
    dates: np.ndarray
    symbols: tuple[str, ...]
    normalization: str = "none"
    specs: tuple[IndicatorSpec, ...] | None = field(default=None)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "dates", np.asarray(self.dates, dtype="datetime64[D]"))
        if vals.shape != (self.dates.size, len(self.symbols), len(self.names)):
            raise ValueError("feature tensor shape does not match dates x symbols x names")

    @property
    def n_features(self) -> int:
        return len(self.names)

    def defined(self) -> np.ndarray:
        """``[day, stock]`` mask of rows with every feature defined."""
        return ~np.isnan(self.values).any(axis=2)

    def truncate(self, last_day: int) -> "FeatureMatrix":
        return FeatureMatrix(self.names, self.values[: last_day + 1], self.dates[: last_day + 1],
                             self.symbols, self.normalization, self.specs)


def zscore_cross_section(values: np.ndarray) -> np.ndarray:
    """Per-day z-score over defined entries; constant cross-sections map to 0."""
    out = np.array(values, dtype=float, copy=True)
    mask = ~np.isnan(out)
    cnt = mask.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(cnt > 0, np.nansum(out, axis=1, keepdims=True) / np.maximum(cnt, 1), np.nan)
        dev = np.where(mask, out - mean, 0.0)
        std = np.sqrt((dev ** 2).sum(axis=1, keepdims=True) / np.maximum(cnt, 1))
        z = np.where(std > 0, dev / np.where(std > 0, std, 1.0), 0.0)
    out = np.where(mask, z, np.nan)
    return out


def build_features(panel: PricePanel, specs: Sequence[IndicatorSpec] | None = None,
                   normalize: bool = True) -> FeatureMatrix:
    if specs is None:
        specs = default_specs()
    specs = [s if isinstance(s, IndicatorSpec) else IndicatorSpec.parse(str(s)) for s in specs]
    if not specs:
        raise ValueError("at least one indicator spec is required")
    cols = [compute_indicator(s, panel) for s in specs]
    values = np.stack(cols, axis=2)
    if normalize:
        values = zscore_cross_section(values)
    return FeatureMatrix(
        names=tuple(s.name for s in specs),
        values=values,
        dates=panel.dates,
        symbols=panel.symbols,
        normalization="cross_sectional_zscore" if normalize else "none",
        specs=tuple(specs),
    )


def _returns_array(returns) -> np.ndarray:
    return returns.values if isinstance(returns, ReturnMatrix) else np.asarray(returns, dtype=float)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ok = ~(np.isnan(a) | np.isnan(b))
    if ok.sum() < 2:
        raise UndefinedICError("fewer than 2 defined pairs")
    da = a[ok] - a[ok].mean()
    db = b[ok] - b[ok].mean()
    va, vb = np.dot(da, da), np.dot(db, db)
    if va == 0.0 or vb == 0.0:
        raise UndefinedICError("zero variance in feature or return vector")
    return float(np.clip(np.dot(da, db) / np.sqrt(va * vb), -1.0, 1.0))


def information_coefficient(feature: np.ndarray, returns, day: int) -> float:
    """Cross-sectional Pearson correlation of an indicator with returns on ``day``.

    ``feature`` is a ``[day, stock]`` array; ``returns`` a ReturnMatrix (or its
    array) whose row ``day`` holds the forward returns from that day.
    """
    return pearson(np.asarray(feature)[day], _returns_array(returns)[day])


def ic_series(feature: np.ndarray, returns) -> np.ndarray:
    """Daily IC for every calendar day (NaN where undefined)."""
    r = _returns_array(returns)
    out = np.full(r.shape[0], np.nan)
    for t in range(r.shape[0]):
        try:
            out[t] = pearson(feature[t], r[t])
        except UndefinedICError:
            pass
    return out


def windowed_ic(feature: np.ndarray, returns, window: int) -> np.ndarray:
    """Trailing mean of daily IC over ``window`` days; NaN until the window is full."""
    if window < 1:
        raise ValueError("window must be >= 1")
    daily = ic_series(feature, returns)
    out = np.full(daily.shape, np.nan)
    for t in range(window - 1, daily.size):
        seg = daily[t - window + 1: t + 1]
        if not np.isnan(seg).any():
            out[t] = seg.mean()
    return out


def multiscale_ic(panel: PricePanel, specs: Sequence[IndicatorSpec], horizons: Sequence[int]) -> dict:
    """Mean daily IC of each indicator against ``horizon``-day forward returns.

    Diagnostic only; returns ``{horizon: {indicator_name: mean IC}}``.
    """
    out = {}
    cols = {s.name: compute_indicator(s, panel) for s in specs}
    for h in horizons:
        ret = compute_returns(panel, h)
        row = {}
        for name, v in cols.items():
            ics = ic_series(v, ret)
            row[name] = float(np.nanmean(ics)) if np.isfinite(ics).any() else float("nan")
        out[h] = row
    return out


def write_features(features: FeatureMatrix, returns: ReturnMatrix, dest) -> None:
    """CSV ``date,symbol,<indicator columns...>,label``; empty cells are undefined.

    Rows are written for every (day, stock) with at least one defined value
    or a defined label.
    """
    if features.symbols != returns.symbols or not np.array_equal(features.dates, returns.dates):
        raise ValueError("features and returns are not aligned")
    fmt = lambda x: "" if np.isnan(x) else repr(float(x))  # noqa: E731
    with Path(dest).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "symbol", *features.names, "label"])
        for t, day in enumerate(features.dates):
            ds = str(day)
            for i, sym in enumerate(features.symbols):
                row = features.values[t, i]
                lab = returns.values[t, i]
                if np.isnan(row).all() and np.isnan(lab):
                    continue
                w.writerow([ds, sym, *(fmt(x) for x in row), fmt(lab)])


def read_features(src) -> tuple[FeatureMatrix, ReturnMatrix]:
    with Path(src).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["date", "symbol"] or header[-1] != "label":
            raise ValueError(f"{src}: expected header date,symbol,<features...>,label")
        names = header[2:-1]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{src}: line {lineno}: expected {len(header)} fields")
            try:
                vals = [float(x) if x != "" else np.nan for x in row[2:]]
                day = dt.date.fromisoformat(row[0])
            except ValueError:
                raise ValueError(f"{src}: line {lineno}: malformed value") from None
            rows.append((day, row[1], vals))
    if not rows:
        raise ValueError(f"{src}: no data rows")
    dates = sorted({r[0] for r in rows})
    symbols = sorted({r[1] for r in rows})
    di = {d: n for n, d in enumerate(dates)}
    si = {s: n for n, s in enumerate(symbols)}
    values = np.full((len(dates), len(symbols), len(names)), np.nan)
    labels = np.full((len(dates), len(symbols)), np.nan)
    for day, sym, vals in rows:
        values[di[day], si[sym]] = vals[:-1]
        labels[di[day], si[sym]] = vals[-1]
    dates = np.array(dates, dtype="datetime64[D]")
    fm = FeatureMatrix(tuple(names), values, dates, tuple(symbols), normalization="file")
    return fm, ReturnMatrix(labels, 1, dates, tuple(symbols))
