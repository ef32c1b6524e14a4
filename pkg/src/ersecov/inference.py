"""Stationary-bootstrap tests for differences between two return series.

Randomness comes from numpy's PCG64 generator.  Replicate ``k`` of a test
seeded with ``s`` draws from ``PCG64(SeedSequence([s, k]))``, so results do
not depend on how replicates are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ErsecovError

STAR_LEVELS = ((0.01, "***"), (0.05, "**"), (0.1, "*"))


@dataclass(frozen=True)
class BootstrapConfig:
    n_samples_B: int = 1000
    mean_block_b: float = 5.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_samples_B < 1:
            raise ValueError("n_samples_B must be >= 1")
        if self.mean_block_b < 1:
            raise ValueError("mean_block_b must be >= 1")


class TestResult(NamedTuple):
    statistic: float
    p_value: float

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)


def significance_stars(p_value: float) -> str:
    if not math.isfinite(p_value):
        return ""
    for level, mark in STAR_LEVELS:
        if p_value < level:
            return mark
    return ""


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, replicate])))


def stationary_bootstrap_indices(length_T: int, config: BootstrapConfig,
                                 replicate: int = 0) -> np.ndarray:
    """One resampling index vector.

    Each position continues the current block (previous index + 1, wrapping
    at ``length_T``) with probability ``1 - 1/b`` and otherwise restarts at a
    uniformly drawn index.
    """
    if length_T < 1:
        raise ValueError("length_T must be >= 1")
    rng = replicate_rng(config.rng_seed, replicate)
    u = rng.random((2, length_T))
    starts = np.minimum((u[0] * length_T).astype(np.int64), length_T - 1)
    restart = u[1] < 1.0 / config.mean_block_b
    restart[0] = True
    # position of the most recent restart at or before each t
    anchor = np.maximum.accumulate(np.where(restart, np.arange(length_T), 0))
    return (starts[anchor] + np.arange(length_T) - anchor) % length_T


def _bootstrap_index_matrix(length_T: int, config: BootstrapConfig) -> np.ndarray:
    return np.stack([stationary_bootstrap_indices(length_T, config, k)
                     for k in range(config.n_samples_B)])


def _paired(series_a, series_b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError("series must be 1-d and of equal length")
    if len(a) < 10:
        raise ValueError(f"need at least 10 paired observations, got {len(a)}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("series contain non-finite values")
    return a, b


def _flat(x: np.ndarray) -> bool:
    return float(x.std(ddof=1)) <= 1e-14 * max(1.0, float(np.abs(x).max()))


def _p_value(stat: float, boot: np.ndarray) -> float:
    centered = np.abs(boot - stat)
    # ties count as extreme, so an exact null yields p = 1
    return float(np.mean(centered >= abs(stat) - 1e-15 * max(1.0, abs(stat))))


def variance_equality_test(series_a, series_b, config: BootstrapConfig | None = None) -> TestResult:
    """Two-sided test of ``var(a) == var(b)`` on ``log(var_a / var_b)``.

    Both series are resampled with the same indices in each replicate.
    """
    config = config or BootstrapConfig()
    a, b = _paired(series_a, series_b)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if _flat(a) or _flat(b):
        raise ErsecovError("variance test undefined: a series has zero variance")
    stat = math.log(va / vb)
    idx = _bootstrap_index_matrix(len(a), config)
    ba = a[idx].var(axis=1, ddof=1)
    bb = b[idx].var(axis=1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        boot = np.log(ba / bb)
    boot = boot[np.isfinite(boot)]
    return TestResult(stat, _p_value(stat, boot) if boot.size else float("nan"))


def _sharpe_rows(x: np.ndarray) -> np.ndarray:
    sd = x.std(axis=-1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return x.mean(axis=-1) / sd


def sharpe_difference_test(series_a, series_b, config: BootstrapConfig | None = None) -> TestResult:
    """Two-sided test of equal Sharpe ratios on ``sharpe_a - sharpe_b``."""
    config = config or BootstrapConfig()
    a, b = _paired(series_a, series_b)
    if _flat(a) or _flat(b):
        raise ErsecovError("Sharpe test undefined: a series has zero variance")
    stat = float(_sharpe_rows(a) - _sharpe_rows(b))
    idx = _bootstrap_index_matrix(len(a), config)
    boot = _sharpe_rows(a[idx]) - _sharpe_rows(b[idx])
    boot = boot[np.isfinite(boot)]
    return TestResult(stat, _p_value(stat, boot) if boot.size else float("nan"))
