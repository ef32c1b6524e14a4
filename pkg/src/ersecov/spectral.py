"""Sample moments, the correlation spectrum and deviation degrees.

The deviation degree of a unit vector ``x`` is ``(1'x)**2``: zero on the
hyperplane orthogonal to the all-ones vector and ``n`` on the all-ones
direction itself.  For a positively correlated universe the dominant
eigenvector carries almost all of the total deviation ``n`` and the
weak-factor eigenvectors sit close to that hyperplane.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import ReturnsPanel
from .errors import MomentError, SpectralError

CLAMP_WINDOW = 1e-8
_SIGN_TIE = 1e-12


@dataclass(frozen=True, eq=False)
class SampleMoments:
    """Mean, covariance (``L - 1`` denominator), standard deviations and correlation."""

    mean: np.ndarray
    covariance: np.ndarray
    std_diag: np.ndarray
    correlation: np.ndarray
    assets: tuple[str, ...] | None = None
    n_obs: int = 0

    @property
    def n(self) -> int:
        return len(self.mean)


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Eigenpairs of the sample correlation matrix, ascending.

    Column ``i`` of ``eigenvectors`` pairs with ``eigenvalues[i]`` and has a
    non-negative projection on the all-ones vector.
    """

    moments: SampleMoments
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class DeviationProfile:
    degrees: np.ndarray
    total: float


class DominanceCheck(NamedTuple):
    T_max: float
    lambda_max: float
    nM: float
    holds: bool
    assumption_1: bool


class WeakFactorBounds(NamedTuple):
    bound_rows: float
    bound_b: float
    b: float


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def sample_moments(panel_window) -> SampleMoments:
    """Moments of a return window (a ``ReturnsPanel`` or a ``T x n`` array)."""
    if isinstance(panel_window, ReturnsPanel):
        x = panel_window.returns
        assets = panel_window.assets
    else:
        x = np.asarray(panel_window, dtype=float)
        assets = None
    if x.ndim != 2:
        raise MomentError(f"expected a 2-d window, got shape {x.shape}")
    L, n = x.shape
    if L < 2:
        raise MomentError(f"need at least 2 observations, got {L}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (L - 1)
    cov = (cov + cov.T) / 2
    var = np.diag(cov).copy()
    scale = max(float(np.abs(x).max()), 1.0) ** 2
    const = np.flatnonzero(var <= 1e-28 * scale)
    if const.size:
        names = [assets[j] if assets else f"column {j}" for j in const]
        raise MomentError(f"zero variance in window for: {', '.join(names)}")
    std = np.sqrt(var)
    corr = cov / np.outer(std, std)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return SampleMoments(_frozen(mean), _frozen(cov), _frozen(std), _frozen(corr),
                         assets=assets, n_obs=L)


def moments_from_covariance(covariance, mean=None) -> SampleMoments:
    """Build moments directly from a covariance matrix (no return window)."""
    cov = np.asarray(covariance, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise MomentError(f"covariance must be square, got shape {cov.shape}")
    std = np.sqrt(np.diag(cov))
    if np.any(std <= 0):
        raise MomentError("covariance has a non-positive diagonal entry")
    corr = cov / np.outer(std, std)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    mean = np.zeros(len(std)) if mean is None else mean
    return SampleMoments(_frozen(mean), _frozen(cov), _frozen(std), _frozen(corr))


def _normalize_signs(Q: np.ndarray) -> np.ndarray:
    Q = Q.copy()
    proj = Q.sum(axis=0)
    for i in range(Q.shape[1]):
        if abs(proj[i]) > _SIGN_TIE:
            if proj[i] < 0:
                Q[:, i] = -Q[:, i]
        else:
            first = Q[np.flatnonzero(np.abs(Q[:, i]) > _SIGN_TIE)[0], i]
            if first < 0:
                Q[:, i] = -Q[:, i]
    return Q


def spectral_decompose(moments: SampleMoments) -> SpectralModel:
    R = moments.correlation
    scale = max(1.0, float(np.abs(R).max()))
    if np.abs(R - R.T).max() > 1e-10 * scale:
        raise SpectralError("correlation matrix is not symmetric")
    if np.abs(np.diag(R) - 1).max() > 1e-12:
        raise SpectralError("correlation matrix does not have a unit diagonal")
    try:
        w, Q = np.linalg.eigh(R)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    if w[0] < -CLAMP_WINDOW:
        raise SpectralError(f"correlation matrix has negative eigenvalue {w[0]:.3e}")
    w = np.where(w < 0, 0.0, w)
    return SpectralModel(moments, _frozen(w), _frozen(_normalize_signs(Q)))


def deviation_degree(x) -> float:
    """Squared projection of a unit vector onto the all-ones vector."""
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"deviation degree needs a unit vector, got norm {norm:.12g}")
    return float(x.sum()) ** 2


def deviation_degrees(Q: np.ndarray) -> np.ndarray:
    """Column-wise deviation degrees, without the unit-norm check."""
    return np.asarray(Q).sum(axis=0) ** 2


def deviation_profile(model: SpectralModel) -> DeviationProfile:
    degrees = deviation_degrees(model.eigenvectors)
    return DeviationProfile(_frozen(degrees), float(degrees.sum()))


def mean_correlation(moments: SampleMoments) -> float:
    R = moments.correlation
    return float(R.sum()) / R.shape[0] ** 2


def condition_number(matrix) -> float:
    """Largest over smallest eigenvalue of a symmetric positive definite matrix."""
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(float(np.abs(A).max()), np.finfo(float).tiny)
    if np.abs(A - A.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    w = np.linalg.eigvalsh(A)
    if w[0] <= 0:
        raise ValueError(f"matrix is singular or indefinite (smallest eigenvalue {w[0]:.3e})")
    return float(w[-1] / w[0])


def safe_condition_number(matrix) -> float:
    """``condition_number`` that reports singular input as ``inf``."""
    try:
        return condition_number(matrix)
    except ValueError:
        return float("inf")


def dominance_check(model: SpectralModel, moments: SampleMoments | None = None,
                    slack: float = 1e-8) -> DominanceCheck:
    """Evaluate ``T(q_n) >= lambda_n >= n * M(R)`` for the dominant eigenpair."""
    moments = moments or model.moments
    R = moments.correlation
    n = R.shape[0]
    T_max = float(model.eigenvectors[:, -1].sum()) ** 2
    lam = float(model.eigenvalues[-1])
    nM = n * mean_correlation(moments)
    off = R[~np.eye(n, dtype=bool)]
    assumption = bool(np.all(off > 0))
    holds = T_max >= lam - slack and lam >= nM - slack
    return DominanceCheck(T_max, lam, nM, bool(holds), assumption)


def weak_factor_bounds(moments: SampleMoments) -> WeakFactorBounds:
    """Upper bounds on the deviation degree of a null-space eigenvector."""
    R = moments.correlation
    n = R.shape[0]
    ratios = R.sum(axis=0) ** 2 / (R**2).sum(axis=0)
    bound_rows = n - float(ratios.max())
    b = float(R.min(axis=1).max())
    bound_b = n - (1 + (n - 1) * b) ** 2 / (1 + (n - 1) * b**2)
    return WeakFactorBounds(bound_rows, float(bound_b), b)
