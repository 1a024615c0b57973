"""Panel price data: loading, validation, universe filtering and return labels.

Prices are held as dense ``[day x stock]`` float arrays with NaN marking a
missing record.  A record flagged ``suspended`` keeps its raw prices (so the
file round-trips) but is treated as unavailable by every computation.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CSV_HEADER = ["date", "symbol", "open", "high", "low", "close", "volume", "suspended"]
PRICE_FIELDS = ("open", "high", "low", "close")


class PanelError(ValueError):
    """Raised for malformed or inconsistent panel input."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Aligned calendar x stock matrix of OHLCV records.

    ``present[t, i]`` is False where the file had no row; such cells are
    also marked ``suspended``.
    """

    dates: np.ndarray  # datetime64[D], strictly increasing
    symbols: tuple[str, ...]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    suspended: np.ndarray
    present: np.ndarray = field(default=None)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        if dates.ndim != 1:
            raise PanelError("dates must be one-dimensional")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise PanelError("calendar must be strictly increasing")
        shape = (dates.size, len(self.symbols))
        object.__setattr__(self, "dates", _frozen(dates))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if len(set(self.symbols)) != len(self.symbols):
            raise PanelError("duplicate stock symbols")
        for name in ("open", "high", "low", "close", "volume"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise PanelError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, _frozen(arr))
        present = self.present
        if present is None:
            present = ~np.isnan(self.close)
        present = np.asarray(present, dtype=bool)
        suspended = np.asarray(self.suspended, dtype=bool) | ~present
        if present.shape != shape or suspended.shape != shape:
            raise PanelError("mask shape mismatch")
        object.__setattr__(self, "present", _frozen(present))
        object.__setattr__(self, "suspended", _frozen(suspended))

    @property
    def n_days(self) -> int:
        return int(self.dates.size)

    @property
    def n_stocks(self) -> int:
        return len(self.symbols)

    def price(self, name: str) -> np.ndarray:
        """Price matrix with suspended or missing cells set to NaN."""
        if name not in PRICE_FIELDS:
            raise KeyError(name)
        out = np.array(getattr(self, name), dtype=float)
        out[self.suspended] = np.nan
        return out

    def select(self, stocks: Sequence[int]) -> "PricePanel":
        idx = np.asarray(stocks, dtype=int)
        return PricePanel(
            dates=self.dates,
            symbols=tuple(self.symbols[i] for i in idx),
            open=self.open[:, idx],
            high=self.high[:, idx],
            low=self.low[:, idx],
            close=self.close[:, idx],
            volume=self.volume[:, idx],
            suspended=self.suspended[:, idx],
            present=self.present[:, idx],
        )

    def truncate(self, last_day: int) -> "PricePanel":
        """Panel restricted to calendar days ``0..last_day`` inclusive."""
        sl = slice(0, last_day + 1)
        return PricePanel(
            dates=self.dates[sl],
            symbols=self.symbols,
            open=self.open[sl],
            high=self.high[sl],
            low=self.low[sl],
            close=self.close[sl],
            volume=self.volume[sl],
            suspended=self.suspended[sl],
            present=self.present[sl],
        )

    def equals(self, other: "PricePanel") -> bool:
        if self.symbols != other.symbols or not np.array_equal(self.dates, other.dates):
            return False
        if not (np.array_equal(self.present, other.present)
                and np.array_equal(self.suspended, other.suspended)):
            return False
        return all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True)
            for f in ("open", "high", "low", "close", "volume")
        )


@dataclass(frozen=True, eq=False)
class ReturnMatrix:
    """Forward fractional returns; ``values[t, i]`` spans ``t -> t + horizon``."""

    values: np.ndarray
    horizon: int
    dates: np.ndarray
    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float)))
        object.__setattr__(self, "dates", _frozen(np.asarray(self.dates, dtype="datetime64[D]")))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if self.values.shape != (self.dates.size, len(self.symbols)):
            raise PanelError("return matrix shape does not match calendar x stocks")

    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)


def _parse_float(text: str, name: str, lineno: int, allow_empty: bool) -> float:
    if text == "":
        if allow_empty:
            return np.nan
        raise PanelError(f"line {lineno}: empty {name}")
    try:
        return float(text)
    except ValueError:
        raise PanelError(f"line {lineno}: bad {name} value {text!r}") from None


def load_panel(source: str | Path) -> PricePanel:
    """Read a ``date,symbol,open,high,low,close,volume,suspended`` CSV file.

    The calendar is the union of all dates in the file; a stock with no row
    on some date gets a missing (suspended) record there.
    """
    path = Path(source)
    rows = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise PanelError(f"{path}: empty file")
        if [h.strip() for h in header] != CSV_HEADER:
            raise PanelError(f"{path}: line 1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise PanelError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            date_s, sym = row[0].strip(), row[1].strip()
            try:
                date = dt.date.fromisoformat(date_s)
            except ValueError:
                raise PanelError(f"line {lineno}: bad date {date_s!r}") from None
            if not sym:
                raise PanelError(f"line {lineno}: empty symbol")
            susp_s = row[7].strip()
            if susp_s not in ("0", "1"):
                raise PanelError(f"line {lineno}: suspended must be 0 or 1, got {susp_s!r}")
            suspended = susp_s == "1"
            o, h, lo, c = (
                _parse_float(row[k].strip(), CSV_HEADER[k], lineno, suspended) for k in range(2, 6)
            )
            vol = _parse_float(row[6].strip(), "volume", lineno, suspended)
            if not suspended:
                if min(o, h, lo, c) <= 0:
                    raise PanelError(f"line {lineno}: prices must be positive")
                if vol < 0:
                    raise PanelError(f"line {lineno}: negative volume")
                if not (lo <= min(o, c) and max(o, c) <= h):
                    raise PanelError(
                        f"line {lineno}: OHLC ordering violated (low={lo}, high={h}, open={o}, close={c})"
                    )
            key = (date, sym)
            if key in rows:
                raise PanelError(f"line {lineno}: duplicate record for {date_s} {sym}")
            rows[key] = (o, h, lo, c, vol, suspended)
    if not rows:
        raise PanelError(f"{path}: no data rows")

    dates = sorted({k[0] for k in rows})
    symbols = sorted({k[1] for k in rows})
    di = {d: n for n, d in enumerate(dates)}
    si = {s: n for n, s in enumerate(symbols)}
    shape = (len(dates), len(symbols))
    arrays = {f: np.full(shape, np.nan) for f in ("open", "high", "low", "close", "volume")}
    suspended = np.ones(shape, dtype=bool)
    present = np.zeros(shape, dtype=bool)
    for (date, sym), (o, h, lo, c, vol, susp) in rows.items():
        t, i = di[date], si[sym]
        arrays["open"][t, i] = o
        arrays["high"][t, i] = h
        arrays["low"][t, i] = lo
        arrays["close"][t, i] = c
        arrays["volume"][t, i] = vol
        suspended[t, i] = susp
        present[t, i] = True
    return PricePanel(
        dates=np.array(dates, dtype="datetime64[D]"),
        symbols=tuple(symbols),
        suspended=suspended,
        present=present,
        **arrays,
    )


def _fmt(x: float) -> str:
    return "" if np.isnan(x) else repr(float(x))


def save_panel(panel: PricePanel, dest: str | Path) -> None:
    """Write the panel in the loader's CSV schema, rows ordered by (date, symbol)."""
    order = np.argsort(np.array(panel.symbols, dtype=object), kind="stable")
    with Path(dest).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, day in enumerate(panel.dates):
            ds = str(day)
            for i in order:
                if not panel.present[t, i]:
                    continue
                w.writerow([
                    ds, panel.symbols[i],
                    _fmt(panel.open[t, i]), _fmt(panel.high[t, i]),
                    _fmt(panel.low[t, i]), _fmt(panel.close[t, i]),
                    _fmt(panel.volume[t, i]),
                    "1" if panel.suspended[t, i] else "0",
                ])


def filter_universe(panel: PricePanel, max_suspension_ratio: float) -> PricePanel:
    """Keep stocks suspended on at most ``max_suspension_ratio`` of calendar days."""
    if not 0.0 <= max_suspension_ratio <= 1.0:
        raise ValueError("max_suspension_ratio must lie in [0, 1]")
    if panel.n_days == 0:
        return panel
    ratio = panel.suspended.sum(axis=0) / panel.n_days
    keep = np.flatnonzero(ratio <= max_suspension_ratio)
    return panel.select(keep)


def compute_returns(panel: PricePanel, horizon: int = 1) -> ReturnMatrix:
    """Close-to-close return over ``horizon`` days; NaN unless both ends trade."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if horizon >= panel.n_days:
        raise ValueError(f"horizon {horizon} must be smaller than the calendar length {panel.n_days}")
    close = panel.price("close")
    values = np.full(close.shape, np.nan)
    values[:-horizon] = close[horizon:] / close[:-horizon] - 1.0
    return ReturnMatrix(values=values, horizon=horizon, dates=panel.dates, symbols=panel.symbols)
