"""Covariance estimation for positively correlated assets by eigenvector rotation."""

from .backtest import BacktestConfig, BacktestResult, rolling_backtest
from .baselines import lin1p_estimate, linc_estimate, sample_estimate
from .data import MissingPolicy, ReturnsPanel, load_returns_csv, synthesize_panel
from .erse import CovarianceEstimate, ErseConfig, erse, erse_delta_sweep
from .inference import BootstrapConfig, sharpe_difference_test, variance_equality_test
from .portfolio import ew_weights, gmv_weights, unit_cost_portfolio
from .spectral import SampleMoments, SpectralModel, sample_moments, spectral_decompose
from .strategies import StrategySpec, parse_strategy

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "BootstrapConfig",
    "CovarianceEstimate",
    "ErseConfig",
    "MissingPolicy",
    "ReturnsPanel",
    "SampleMoments",
    "SpectralModel",
    "StrategySpec",
    "erse",
    "erse_delta_sweep",
    "ew_weights",
    "gmv_weights",
    "lin1p_estimate",
    "linc_estimate",
    "load_returns_csv",
    "parse_strategy",
    "rolling_backtest",
    "sample_estimate",
    "sample_moments",
    "sharpe_difference_test",
    "spectral_decompose",
    "synthesize_panel",
    "unit_cost_portfolio",
    "variance_equality_test",
]

__version__ = "0.1.0"
