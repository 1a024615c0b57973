"""Forecast the drift of a linear stock predictor's parameters with a multi-scale LSTM."""

from .backtest import BacktestReport, simulate
from .first_order import LinearParams, ParamSeries, RidgeConfig, fit_ridge, param_collect
from .indicators import FeatureMatrix, IndicatorSpec, build_features, compute_indicator
from .market_data import PricePanel, ReturnMatrix, compute_returns, load_panel
from .second_order import SecondOrderModel, TrainConfig, predict_rolling, train
from .synthetic import RegimeSpec, generate

__version__ = "0.1.0"

__all__ = [
    "BacktestReport", "simulate",
    "LinearParams", "ParamSeries", "RidgeConfig", "fit_ridge", "param_collect",
    "FeatureMatrix", "IndicatorSpec", "build_features", "compute_indicator",
    "PricePanel", "ReturnMatrix", "compute_returns", "load_panel",
    "SecondOrderModel", "TrainConfig", "predict_rolling", "train",
    "RegimeSpec", "generate",
]
