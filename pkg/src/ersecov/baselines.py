"""Comparison estimators: sample covariance and two linear shrinkage rules.

Both shrinkage rules blend the sample covariance ``S`` with a structured
target ``F`` as ``rho * F + (1 - rho) * S``.  The intensity uses the usual
plug-in ratio

    pi_hat    = mean_t || x_t x_t' - S ||_F^2      (x_t demeaned)
    gamma_hat = || S - F ||_F^2
    rho       = clip(pi_hat / (L * gamma_hat), 0, 1)

with no target-covariance correction for the constant-correlation target.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .data import ReturnsPanel
from .erse import CovarianceEstimate
from .errors import MomentError
from .spectral import SampleMoments, safe_condition_number, sample_moments


class BaselineLabel(str, Enum):
    SAMPLE = "SAMPLE"
    LIN1P = "LIN1P"
    LINC = "LINC"


# Named in comparison tables but not implemented; they report N/A.
UNIMPLEMENTED_LABELS = ("LIN2P", "LIND", "LINM", "GIS", "LIS", "QIS")


def _window(panel_window) -> np.ndarray:
    x = panel_window.returns if isinstance(panel_window, ReturnsPanel) else np.asarray(
        panel_window, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise MomentError(f"need a T x n window with T >= 2, got shape {x.shape}")
    return x


def shrinkage_intensity(x: np.ndarray, S: np.ndarray, F: np.ndarray) -> float:
    """Clipped plug-in intensity for shrinking ``S`` towards ``F``."""
    L = x.shape[0]
    xc = x - x.mean(axis=0)
    # || x x' - S ||^2 = (x'x)^2 - 2 x'Sx + ||S||^2
    sq = np.einsum("ti,ti->t", xc, xc)
    quad = np.einsum("ti,ij,tj->t", xc, S, xc)
    pi_hat = float(np.mean(sq**2 - 2 * quad + np.sum(S * S)))
    gamma_hat = float(np.sum((S - F) ** 2))
    if gamma_hat <= 0:
        return 0.0
    return float(np.clip(pi_hat / (L * gamma_hat), 0.0, 1.0))


def sample_estimate(moments: SampleMoments) -> CovarianceEstimate:
    cov = np.array(moments.covariance, copy=True)
    return CovarianceEstimate(
        label=BaselineLabel.SAMPLE.value,
        covariance=cov,
        condition_number=safe_condition_number(cov),
    )


def lin1p_estimate(panel_window) -> CovarianceEstimate:
    """Shrink towards ``mu * I`` with ``mu`` the average sample variance."""
    x = _window(panel_window)
    S = np.cov(x, rowvar=False, ddof=1)
    n = S.shape[0]
    mu = np.trace(S) / n
    F = mu * np.eye(n)
    rho = shrinkage_intensity(x, S, F)
    cov = rho * F + (1 - rho) * S
    return CovarianceEstimate(
        label=BaselineLabel.LIN1P.value,
        covariance=cov,
        condition_number=safe_condition_number(cov),
        params={"intensity": rho},
    )


def constant_correlation_target(S: np.ndarray) -> np.ndarray:
    std = np.sqrt(np.diag(S))
    if np.any(std <= 0):
        raise MomentError("constant-correlation target needs positive variances")
    corr = S / np.outer(std, std)
    n = S.shape[0]
    r_bar = (corr.sum() - n) / (n * (n - 1))
    F = r_bar * np.outer(std, std)
    np.fill_diagonal(F, np.diag(S))
    return F


def linc_estimate(panel_window) -> CovarianceEstimate:
    """Shrink towards the constant-correlation matrix; the diagonal of S is kept."""
    x = _window(panel_window)
    S = sample_moments(x).covariance
    F = constant_correlation_target(S)
    rho = shrinkage_intensity(x, S, F)
    cov = rho * F + (1 - rho) * S
    np.fill_diagonal(cov, np.diag(S))
    return CovarianceEstimate(
        label=BaselineLabel.LINC.value,
        covariance=cov,
        condition_number=safe_condition_number(cov),
        params={"intensity": rho},
    )
