"""Rolling-window GMV backtests and the experiments built on them.

At each out-of-sample period ``t`` every strategy is fitted on the ``L``
rows before ``t``, turned into GMV weights (equal weights for EW) and
earns ``w' r_t``.  The window then slides forward by one period.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .data import ReturnsPanel
from .errors import ErsecovError
from .inference import BootstrapConfig, sharpe_difference_test, significance_stars, variance_equality_test
from .portfolio import WeightVector, ew_weights, gmv_weights
from .strategies import StrategySpec, default_strategies

logger = logging.getLogger(__name__)

METRIC_NAMES = ("oos_variance", "sharpe", "cond_mean", "cond_std")


@dataclass(frozen=True)
class BacktestConfig:
    """Rolling-window settings.

    ``start_index`` is the 1-based period of the first out-of-sample return;
    by default it is ``window_L + 1`` so that ``T - L`` returns are produced.
    """

    window_L: int = 120
    strategies: tuple[StrategySpec, ...] = field(default_factory=lambda: tuple(default_strategies()))
    start_index: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if self.window_L < 2:
            raise ValueError("window_L must be >= 2")
        if self.start_index is not None and self.start_index <= self.window_L:
            raise ValueError(
                f"start_index ({self.start_index}) must exceed window_L ({self.window_L})"
            )
        names = [s.name for s in self.strategies]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate strategies: {names}")

    @property
    def first_period(self) -> int:
        return self.start_index if self.start_index is not None else self.window_L + 1

    def validate(self, panel: ReturnsPanel) -> None:
        T = panel.n_periods
        if not self.window_L < T:
            raise ValueError(f"window_L ({self.window_L}) must be below T ({T})")
        if self.first_period > T:
            raise ValueError(f"start_index ({self.first_period}) is beyond T ({T})")


@dataclass
class BacktestResult:
    dates: tuple[str, ...]
    assets: tuple[str, ...]
    strategy_names: list[str]
    oos_returns: dict[str, np.ndarray]
    weight_history: dict[str, list[WeightVector | None]]
    condition_history: dict[str, np.ndarray]
    metrics: dict[str, dict | None]
    failures: dict[str, str] = field(default_factory=dict)
    window_L: int = 0

    def complete(self, name: str) -> bool:
        r = self.oos_returns.get(name)
        return r is not None and bool(np.all(np.isfinite(r)))


def oos_variance(returns) -> float:
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 returns")
    return float(r.var(ddof=1))


def sharpe_ratio(returns, risk_free=None) -> float:
    """Mean excess return over its sample standard deviation.

    ``risk_free`` defaults to zero; a scalar or a series of the same length
    may be given.
    """
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 returns")
    excess = r - (0.0 if risk_free is None else np.asarray(risk_free, dtype=float))
    sd = float(excess.std(ddof=1))
    mean = float(excess.mean())
    if sd <= 1e-14 * max(1.0, float(np.abs(excess).max())):
        if mean == 0.0:
            return 0.0
        raise ValueError("Sharpe ratio undefined: zero standard deviation")
    return mean / sd


def _metrics(returns: np.ndarray, conds: np.ndarray) -> dict | None:
    if returns.size < 2 or not np.all(np.isfinite(returns)):
        return None
    try:
        sharpe = sharpe_ratio(returns)
    except ValueError:
        sharpe = math.nan
    finite = conds[np.isfinite(conds)]
    return {
        "oos_variance": oos_variance(returns),
        "sharpe": sharpe,
        "cond_mean": float(finite.mean()) if finite.size else math.nan,
        "cond_std": float(finite.std(ddof=1)) if finite.size > 1 else math.nan,
    }


def rolling_backtest(panel: ReturnsPanel, config: BacktestConfig) -> BacktestResult:
    config.validate(panel)
    x = panel.returns
    T, n = x.shape
    L = config.window_L
    first = config.first_period - 1  # 0-based row of the first OOS return
    rows = range(first, T)
    m = len(rows)
    specs = list(config.strategies)
    names = [s.name for s in specs]
    oos = {s.name: np.full(m, np.nan) for s in specs if s.implemented}
    weights: dict[str, list] = {s.name: [None] * m for s in specs if s.implemented}
    conds = {s.name: np.full(m, np.nan) for s in specs if s.implemented}
    failures: dict[str, str] = {
        s.name: "not implemented" for s in specs if not s.implemented
    }
    live = [s for s in specs if s.implemented]

    for k, t in enumerate(rows):
        window = x[t - L:t]
        for spec in list(live):
            try:
                est = spec.fit(window)
                if est is None:
                    w = ew_weights(n, spec.name)
                else:
                    w = gmv_weights(est, spec.name)
                    conds[spec.name][k] = est.condition_number
            except (ErsecovError, ValueError, np.linalg.LinAlgError) as exc:
                msg = f"{panel.dates[t]}: {exc}"
                logger.warning("strategy %s failed at %s", spec.name, msg)
                failures[spec.name] = msg
                live.remove(spec)
                continue
            weights[spec.name][k] = w
            oos[spec.name][k] = float(w.weights @ x[t])

    metrics = {}
    for name in names:
        metrics[name] = None if name in failures else _metrics(oos[name], conds[name])
    return BacktestResult(
        dates=tuple(panel.dates[first:]),
        assets=panel.assets,
        strategy_names=names,
        oos_returns=oos,
        weight_history=weights,
        condition_history=conds,
        metrics=metrics,
        failures=failures,
        window_L=L,
    )


def subperiod_metrics(result: BacktestResult) -> tuple[dict, dict]:
    """Metrics on the two halves of the OOS period (the first half takes the odd month)."""
    m = len(result.dates)
    if m < 4:
        raise ValueError(f"need at least 4 OOS periods, got {m}")
    cut = (m + 1) // 2
    first, second = {}, {}
    for name in result.strategy_names:
        if result.metrics.get(name) is None:
            first[name] = second[name] = None
            continue
        r, c = result.oos_returns[name], result.condition_history[name]
        first[name] = _metrics(r[:cut], c[:cut])
        second[name] = _metrics(r[cut:], c[cut:])
    return first, second


@dataclass
class PairwiseTest:
    strategy_pair: str
    test: str
    statistic: float
    p_value: float

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)


def pairwise_tests(result: BacktestResult, reference: str = "ERSE",
                   config: BootstrapConfig | None = None) -> list[PairwiseTest]:
    """Variance and Sharpe tests of every complete strategy against ``reference``."""
    config = config or BootstrapConfig()
    if not result.complete(reference):
        return []
    ref = result.oos_returns[reference]
    out = []
    for name in result.strategy_names:
        if name == reference or not result.complete(name):
            continue
        r = result.oos_returns[name]
        pair = f"{name} vs {reference}"
        for test_name, fn in (("variance", variance_equality_test),
                              ("sharpe", sharpe_difference_test)):
            try:
                res = fn(r, ref, config)
                out.append(PairwiseTest(pair, test_name, res.statistic, res.p_value))
            except (ErsecovError, ValueError) as exc:
                logger.warning("%s test for %s skipped: %s", test_name, pair, exc)
    return out


@dataclass
class SubsampleExperiment:
    draws: list[dict[str, float]]  # per draw: strategy name -> OOS variance (nan if N/A)
    columns: list[list[int]]
    summary: dict[str, dict]
    reference: str


def random_subsample_experiment(panel: ReturnsPanel, n_draws: int, subset_size: int,
                                config: BacktestConfig, reference: str = "ERSE") -> SubsampleExperiment:
    """Repeat the backtest on random asset subsets.

    Summary columns per strategy: mean, std, max and min of the OOS
    variance across draws; ``win_rate`` (for the reference: share of draws
    where it is strictly lowest; for others: share of draws where the
    reference beats it); ``mean_difference`` of (strategy - reference)
    variance with a one-sample t-test p-value.
    """
    n = panel.n_assets
    if not 1 <= subset_size <= n:
        raise ValueError(f"subset_size must lie in [1, {n}], got {subset_size}")
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    rng = np.random.default_rng(config.rng_seed)
    names = [s.name for s in config.strategies]
    draws, columns = [], []
    for _ in range(n_draws):
        cols = np.sort(rng.choice(n, size=subset_size, replace=False)).tolist()
        res = rolling_backtest(panel.select(cols), config)
        draws.append({
            name: (res.metrics[name]["oos_variance"] if res.metrics[name] else math.nan)
            for name in names
        })
        columns.append(cols)

    table = {name: np.array([d[name] for d in draws]) for name in names}
    summary: dict[str, dict] = {}
    ref = table.get(reference)
    for name in names:
        v = table[name]
        if not np.all(np.isfinite(v)):
            summary[name] = None
            continue
        row = {
            "mean": float(v.mean()),
            "std": float(v.std(ddof=1)) if v.size > 1 else math.nan,
            "max": float(v.max()),
            "min": float(v.min()),
        }
        if ref is not None and np.all(np.isfinite(ref)):
            if name == reference:
                others = [table[o] for o in names
                          if o != reference and np.all(np.isfinite(table[o]))]
                lowest = np.all([ref < o for o in others], axis=0) if others else np.ones(n_draws, bool)
                row.update(win_rate=float(np.mean(lowest)), mean_difference=0.0,
                           p_value=math.nan, stars="")
            else:
                diff = v - ref
                p = math.nan
                if diff.size > 1 and diff.std(ddof=1) > 0:
                    p = float(stats.ttest_1samp(diff, 0.0).pvalue)
                row.update(win_rate=float(np.mean(ref < v)), mean_difference=float(diff.mean()),
                           p_value=p, stars=significance_stars(p))
        summary[name] = row
    return SubsampleExperiment(draws, columns, summary, reference)


def window_sweep(panel: ReturnsPanel, windows: Sequence[int],
                 config: BacktestConfig) -> dict[int, BacktestResult]:
    """One backtest per estimation window, all starting at the same period.

    The common start is ``config.start_index`` when set, else
    ``max(windows) + 1``.
    """
    windows = [int(w) for w in windows]
    if not windows:
        return {}
    start = config.start_index if config.start_index is not None else max(windows) + 1
    if max(windows) >= start:
        raise ValueError(f"window {max(windows)} does not fit before the common start {start}")
    out = {}
    for L in windows:
        cfg = BacktestConfig(window_L=L, strategies=config.strategies, start_index=start,
                             rng_seed=config.rng_seed)
        out[L] = rolling_backtest(panel, cfg)
    return out
