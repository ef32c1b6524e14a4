"""Eigenvector rotation shrinkage estimator (ERSE).

Starting from the sample correlation eigenvectors, the vector with the
smallest deviation degree is repeatedly rotated against the one with the
largest until every deviation degree reaches ``delta``.  The rotated
vectors only serve to define revised eigenvalues ``q_hat' R q_hat``; the
covariance is rebuilt on the original sample eigenvectors,

    Sigma_hat = D Q Diag(lambda_hat) Q' D.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ErseInfeasibleError, ErsecovError, RotationError
from .rotation import FEASIBILITY_TOL, RotationStep, per
from .spectral import (
    SampleMoments,
    SpectralModel,
    deviation_degrees,
    safe_condition_number,
    spectral_decompose,
)

DEFAULT_DELTA = 0.25


@dataclass(frozen=True)
class ErseConfig:
    delta: float = DEFAULT_DELTA
    tolerance: float = 1e-12
    max_iterations: int | None = None  # None means n - 1

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    label: str
    covariance: np.ndarray
    eigenvalues_hat: np.ndarray | None = None
    rotation_trace: tuple[RotationStep, ...] = ()
    condition_number: float = float("nan")
    iterations: int = 0
    eigenvectors_hat: np.ndarray | None = None
    params: dict = field(default_factory=dict)


class ShrinkageRecord(NamedTuple):
    step: int
    indices: tuple[int, int]
    gamma: float
    lambda_before: tuple[float, float]
    lambda_after: tuple[float, float]


def _rotate_to_threshold(model: SpectralModel, config: ErseConfig):
    """Run the rotation loop; returns ``(Q_hat, lambda_hat, trace)``.

    ``lambda_hat`` is tracked through the per-step gamma-mixtures.  Ties in
    the argmin/argmax go to the lowest column index.
    """
    n = model.n
    delta = config.delta
    cap = n - 1 if config.max_iterations is None else config.max_iterations
    Q = np.array(model.eigenvectors, dtype=float, copy=True)
    lam = np.array(model.eigenvalues, dtype=float, copy=True)
    T = deviation_degrees(Q)
    trace: list[RotationStep] = []
    while True:
        lo = int(np.argmin(T))
        if T[lo] >= delta - config.tolerance:
            break
        if len(trace) >= cap:
            raise ErsecovError(
                f"rotation loop exceeded {cap} iterations (min deviation {T[lo]:.3e})"
            )
        hi = int(np.argmax(T))
        if T[lo] + T[hi] < 2 * delta - FEASIBILITY_TOL:
            raise ErseInfeasibleError(
                f"infeasible pair at step {len(trace) + 1}: T_min + T_max = "
                f"{T[lo] + T[hi]:.6g} < 2 * delta = {2 * delta:.6g}",
                trace,
            )
        try:
            q_lo, q_hi, step = per(Q[:, lo], Q[:, hi], delta, lam[lo], lam[hi], lo, hi)
        except RotationError as exc:
            raise ErseInfeasibleError(f"step {len(trace) + 1}: {exc}", trace) from exc
        Q[:, lo], Q[:, hi] = q_lo, q_hi
        lam[lo], lam[hi] = step.lambda_after
        T[lo], T[hi] = step.T_after
        trace.append(step)
    return Q, lam, trace


def erse(moments: SampleMoments, config: ErseConfig | None = None,
         model: SpectralModel | None = None) -> CovarianceEstimate:
    """Fit ERSE on sample moments.

    Parameters
    ----------
    moments : SampleMoments
        Moments of the estimation window.
    config : ErseConfig, optional
        Threshold and loop controls; defaults to ``delta = 0.25``.
    model : SpectralModel, optional
        A precomputed decomposition of ``moments.correlation``.

    Raises
    ------
    ErseInfeasibleError
        When the min/max pair cannot be rotated; ``exc.trace`` holds the
        steps already taken.
    """
    config = config or ErseConfig()
    model = model or spectral_decompose(moments)
    Q_hat, _, trace = _rotate_to_threshold(model, config)
    R = moments.correlation
    lam_hat = np.einsum("ij,ij->j", Q_hat, R @ Q_hat)
    Q = model.eigenvectors
    D = moments.std_diag
    core = (Q * lam_hat) @ Q.T
    cov = D[:, None] * core * D[None, :]
    cov = (cov + cov.T) / 2
    return CovarianceEstimate(
        label="ERSE",
        covariance=cov,
        eigenvalues_hat=lam_hat,
        rotation_trace=tuple(trace),
        condition_number=safe_condition_number(cov),
        iterations=len(trace),
        eigenvectors_hat=Q_hat,
        params={"delta": config.delta},
    )


def shrinkage_trace_report(estimate: CovarianceEstimate) -> list[ShrinkageRecord]:
    return [
        ShrinkageRecord(k + 1, (s.index_low, s.index_high), s.gamma,
                        s.lambda_before, s.lambda_after)
        for k, s in enumerate(estimate.rotation_trace)
    ]


class DeltaSweepEntry(NamedTuple):
    delta: float
    estimate: CovarianceEstimate | None
    error: Exception | None


def erse_delta_sweep(moments: SampleMoments, deltas: Sequence[float],
                     tolerance: float = 1e-12) -> list[DeltaSweepEntry]:
    """One independent ERSE fit per threshold; failures are kept per entry."""
    model = spectral_decompose(moments) if len(deltas) else None
    out = []
    for d in deltas:
        try:
            est = erse(moments, ErseConfig(delta=float(d), tolerance=tolerance), model)
            out.append(DeltaSweepEntry(float(d), est, None))
        except (ErsecovError, ValueError) as exc:
            out.append(DeltaSweepEntry(float(d), None, exc))
    return out
