"""Portfolio weights: global minimum variance, equal weights, unit-cost eigenportfolios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import SingularCovarianceError


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray
    strategy_label: str = ""

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if abs(w.sum() - 1.0) > 1e-10 * max(1.0, float(np.abs(w).sum())):
            raise ValueError(f"weights sum to {w.sum():.15g}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def _covariance_of(estimate) -> np.ndarray:
    return np.asarray(getattr(estimate, "covariance", estimate), dtype=float)


def gmv_weights(estimate, label: str | None = None) -> WeightVector:
    """``Sigma^-1 1 / (1' Sigma^-1 1)`` through a Cholesky solve.

    ``estimate`` is a ``CovarianceEstimate`` or a bare matrix.  A failed or
    numerically rank-deficient factorization raises
    ``SingularCovarianceError`` naming the smallest eigenvalue.
    """
    S = _covariance_of(estimate)
    n = S.shape[0]
    label = label if label is not None else getattr(estimate, "label", "GMV")
    try:
        c, lower = cho_factor(S, lower=True, check_finite=True)
        pivots = np.abs(np.diag(c))
        if pivots.min() ** 2 <= n * np.finfo(float).eps * pivots.max() ** 2:
            raise LinAlgError("near-zero pivot")
    except (LinAlgError, ValueError) as exc:
        w_min = float(np.linalg.eigvalsh((S + S.T) / 2)[0])
        raise SingularCovarianceError(
            f"{label}: covariance is not positive definite "
            f"(smallest eigenvalue {w_min:.3e}): {exc}"
        ) from exc
    ones = np.ones(n)
    x = cho_solve((c, lower), ones)
    return WeightVector(x / x.sum(), label)


def ew_weights(n: int, label: str = "EW") -> WeightVector:
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    return WeightVector(np.full(n, 1.0 / n), label)


def unit_cost_portfolio(q) -> WeightVector:
    """Scale a unit vector so its entries sum to one.

    The squared l2 norm of the result is the reciprocal of the deviation
    degree of ``q``.
    """
    q = np.asarray(q, dtype=float)
    s = float(q.sum())
    if abs(s) <= 1e-12:
        raise ValueError("unit-cost portfolio undefined: q is orthogonal to the ones vector")
    return WeightVector(q / s, "unit-cost")
