"""Daily top-K equal-weight backtest with AR@K and SHR@K.

Each day the K stocks with the highest forecasts are bought in equal
weight and held for one day.  No transaction costs.  A selected stock whose
return is undefined (suspended) earns 0, as if its slot were cash.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .market_data import ReturnMatrix

DAYS_PER_YEAR = 365


class UndefinedSharpeError(ValueError):
    pass


def select_top_k(predictions: Mapping[str, float], k: int) -> list[str]:
    """Highest-forecast ``k`` symbols; ties go to the lexicographically smaller id.

    NaN forecasts are ignored.  Fewer than ``k`` candidates returns them all.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cand = [(float(v), s) for s, v in predictions.items() if not np.isnan(v)]
    if not cand:
        raise ValueError("empty prediction set")
    cand.sort(key=lambda item: (-item[0], item[1]))
    return [s for _, s in cand[:k]]


@dataclass(frozen=True)
class PortfolioDay:
    day: np.datetime64
    selected: tuple[str, ...]
    returns: np.ndarray  # per selected stock; undefined entries already 0
    portfolio_return: float
    market_return: float


@dataclass
class BacktestReport:
    k: int
    days: list[PortfolioDay]
    equity: np.ndarray  # length l + 1, equity[0] == 1
    baseline: np.ndarray  # market equal-weight wealth, same length
    ar: float
    shr: float
    shr_skipped_days: int
    sharpe_ts: float  # classical time-series Sharpe of daily portfolio returns, annualised
    metadata: dict = field(default_factory=lambda: {"shr_variance": "population",
                                                    "ar_scaling": "simple_sum_x365_over_l",
                                                    "suspended_selection": "cash"})

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def dates(self) -> np.ndarray:
        return np.array([d.day for d in self.days], dtype="datetime64[D]")

    def metrics(self) -> dict:
        return {
            f"AR@{self.k}": self.ar,
            f"SHR@{self.k}": self.shr,
            f"SHR@{self.k}_skipped_days": float(self.shr_skipped_days),
            f"SharpeTS@{self.k}": self.sharpe_ts,
            f"final_wealth@{self.k}": float(self.equity[-1]),
            "market_final_wealth": float(self.baseline[-1]),
            "days": float(self.n_days),
        }


def annualized_return(selected_returns: Sequence[Sequence[float]], k: int, l: int | None = None) -> float:
    """``(1/K) * sum_d sum_{i in selected_d} r_d^i * 365 / l`` (no compounding)."""
    l = len(selected_returns) if l is None else l
    if l < 1:
        raise ValueError("l must be >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    total = sum(float(np.sum(r)) for r in selected_returns)
    return total / k * DAYS_PER_YEAR / l


def sharpe_ratio(selected_returns: Sequence[Sequence[float]], market_means: Sequence[float],
                 k: int) -> tuple[float, int]:
    """Mean over days of the top-K excess return over the within-day deviation.

    Per day: ``(1/K) sum_i (r_d^i - rbar_d) / sqrt(var_pop(r_d^.))``.  Days
    whose selected returns have zero variance are skipped; the average runs
    over the remaining days.  Returns ``(shr, skipped_days)``.
    """
    if len(selected_returns) != len(market_means):
        raise ValueError("selected returns and market means differ in length")
    if k < 1:
        raise ValueError("k must be >= 1")
    vals, skipped = [], 0
    for r, rbar in zip(selected_returns, market_means):
        r = np.asarray(r, dtype=float)
        sd = float(np.sqrt(np.var(r))) if r.size else 0.0
        if sd == 0.0:
            skipped += 1
            continue
        vals.append(float(np.sum(r - rbar)) / k / sd)
    if not vals:
        raise UndefinedSharpeError("every day has zero variance among selected returns")
    return float(np.mean(vals)), skipped


def _compound(daily: np.ndarray) -> np.ndarray:
    return np.concatenate([[1.0], np.cumprod(1.0 + np.asarray(daily, dtype=float))])


def market_daily_returns(returns: ReturnMatrix | np.ndarray, days: Sequence[int]) -> np.ndarray:
    r = returns.values if isinstance(returns, ReturnMatrix) else np.asarray(returns, dtype=float)
    out = np.zeros(len(days))
    for n, t in enumerate(days):
        row = r[t]
        ok = ~np.isnan(row)
        out[n] = row[ok].mean() if ok.any() else 0.0
    return out


def market_baseline(returns: ReturnMatrix | np.ndarray, days: Sequence[int]) -> np.ndarray:
    """Wealth of holding every stock with a defined return in equal weight each day."""
    if len(days) == 0:
        raise ValueError("empty day range")
    return _compound(market_daily_returns(returns, days))


def sharpe_time_series(daily: np.ndarray) -> float:
    daily = np.asarray(daily, dtype=float)
    sd = daily.std(ddof=1) if daily.size > 1 else 0.0
    return float(daily.mean() / sd * np.sqrt(DAYS_PER_YEAR)) if sd > 0 else float("nan")


def simulate(predictions: np.ndarray, returns: ReturnMatrix, k: int,
             days: Sequence[int]) -> BacktestReport:
    """Backtest forecasts ``predictions[n, stock]`` made on calendar days ``days[n]``."""
    preds = np.asarray(predictions, dtype=float)
    days = [int(t) for t in days]
    if preds.shape != (len(days), len(returns.symbols)):
        raise ValueError(f"predictions shape {preds.shape} does not match {len(days)} days x "
                         f"{len(returns.symbols)} stocks")
    T = returns.values.shape[0]
    # a day without any realised return cannot be traded
    pairs = [(n, t) for n, t in enumerate(days)
             if 0 <= t < T and not np.isnan(preds[n]).all() and not np.isnan(returns.values[t]).all()]
    if not pairs:
        raise ValueError("no overlapping prediction and return days")
    sym = returns.symbols
    index = {s: i for i, s in enumerate(sym)}
    used = [t for _, t in pairs]
    market = market_daily_returns(returns, used)
    book = []
    for (n, t), mkt in zip(pairs, market):
        chosen = select_top_k(dict(zip(sym, preds[n])), k)
        r = np.array([returns.values[t, index[s]] for s in chosen])
        r = np.where(np.isnan(r), 0.0, r)
        book.append(PortfolioDay(returns.dates[t], tuple(chosen), r, float(r.mean()), float(mkt)))
    daily = np.array([d.portfolio_return for d in book])
    sel = [d.returns for d in book]
    try:
        shr, skipped = sharpe_ratio(sel, market, k)
    except UndefinedSharpeError:
        shr, skipped = float("nan"), len(book)
    return BacktestReport(
        k=k,
        days=book,
        equity=_compound(daily),
        baseline=_compound(market),
        ar=annualized_return(sel, k),
        shr=shr,
        shr_skipped_days=skipped,
        sharpe_ts=sharpe_time_series(daily),
    )


def write_equity_csv(curves: Mapping[str, tuple[np.ndarray, np.ndarray]], dest: str | Path) -> None:
    """``date,strategy,wealth``; each curve is ``(dates[l], wealth[l + 1])``.

    Row ``date`` carries the wealth after holding that day's selection.
    """
    with Path(dest).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "strategy", "wealth"])
        for name, (dates, wealth) in curves.items():
            for day, value in zip(dates, wealth[1:]):
                w.writerow([str(day), name, repr(float(value))])


def write_metrics_csv(rows: Mapping[str, float], dest: str | Path) -> None:
    with Path(dest).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for key, value in rows.items():
            w.writerow([key, repr(float(value))])


def plot_equity_svg(curves: Mapping[str, tuple[np.ndarray, np.ndarray]], dest: str | Path,
                    title: str = "Cumulative wealth") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "secondorder"
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for name, (dates, wealth) in curves.items():
        ax.plot(np.asarray(dates, dtype="datetime64[D]").astype("O"), wealth[1:], label=name, lw=1.2)
    ax.set_title(title)
    ax.set_ylabel("wealth")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.autofmt_xdate()
    fig.tight_layout()
    fig.savefig(dest, format="svg", metadata={"Date": None})
    plt.close(fig)
