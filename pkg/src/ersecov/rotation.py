"""Paired eigenvector rotation (PER).

Two orthonormal vectors ``q1`` (deviation below the threshold) and ``q2``
(the accompanying vector, above it) are rotated inside their common plane

    q1' =  cos(t) q1 + sin(t) q2
    q2' = -sin(t) q1 + cos(t) q2

by the smallest angle that puts ``(1'q1')**2`` exactly on the threshold.
The pair's total deviation is unchanged and orthogonality to every other
vector of the basis is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RotationError

# Slack on the feasibility inequalities; the last step of a delta = 1 run
# sits exactly on T_low + T_high = 2 * delta.
FEASIBILITY_TOL = 1e-10
_HALF_PI = math.pi / 2


@dataclass(frozen=True)
class RotationStep:
    index_low: int
    index_high: int
    s1: float
    s2: float
    theta: float
    gamma: float
    T_before: tuple[float, float]
    T_after: tuple[float, float]
    lambda_before: tuple[float, float]
    lambda_after: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "index_low": self.index_low,
            "index_high": self.index_high,
            "s1": self.s1,
            "s2": self.s2,
            "theta": self.theta,
            "gamma": self.gamma,
            "T_before": list(self.T_before),
            "T_after": list(self.T_after),
            "lambda_before": list(self.lambda_before),
            "lambda_after": list(self.lambda_after),
        }


def _wrap_upper(angle: float) -> float:
    """Reduce modulo pi into (-pi/2, pi/2]."""
    out = angle - math.pi * math.ceil((angle - _HALF_PI) / math.pi)
    return _HALF_PI if out <= -_HALF_PI else out


def _wrap_lower(angle: float) -> float:
    """Reduce modulo pi into [-pi/2, pi/2)."""
    out = angle - math.pi * math.floor((angle + _HALF_PI) / math.pi)
    return -_HALF_PI if out >= _HALF_PI else out


def check_feasible(s1: float, s2: float, delta: float, tol: float = FEASIBILITY_TOL,
                   pair_sum: bool = True) -> None:
    """Raise ``RotationError`` naming the first violated inequality.

    ``s1**2 <= delta <= s2**2`` makes the angle equation solvable;
    ``pair_sum`` additionally requires ``s1**2 + s2**2 >= 2 * delta`` so the
    accompanying vector stays at or above the threshold after the rotation.
    """
    t1, t2 = s1 * s1, s2 * s2
    if t1 > delta + tol:
        raise RotationError(f"T(q1) = {t1:.12g} already exceeds delta = {delta:.12g}")
    if delta > t2 + tol:
        raise RotationError(f"delta = {delta:.12g} exceeds T(q2) = {t2:.12g}")
    if pair_sum and t1 + t2 < 2 * delta - tol:
        raise RotationError(
            f"T(q1) + T(q2) = {t1 + t2:.12g} is below 2 * delta = {2 * delta:.12g}"
        )


def solve_rotation_angles(s1: float, s2: float, delta: float) -> tuple[float, float]:
    """Both angles in ``[-pi/2, pi/2]`` with ``(s1 cos t + s2 sin t)**2 == delta``.

    Writes ``s1 cos t + s2 sin t = r cos(t - phi)`` with ``phi = atan2(s2, s1)``,
    so the roots are ``phi +/- arccos(sqrt(delta) / r)`` modulo pi.  Unlike
    the arctangent quotient this has no singularity at ``s2**2 == delta``.
    """
    check_feasible(s1, s2, delta, pair_sum=False)
    r = math.hypot(s1, s2)
    phi = math.atan2(s2, s1)
    alpha = math.acos(min(1.0, math.sqrt(max(delta, 0.0)) / r))
    return _wrap_upper(phi + alpha), _wrap_lower(phi - alpha)


def select_angle(theta_a: float, theta_b: float) -> float:
    """The angle of smaller magnitude; an exact tie goes to the positive one."""
    if abs(theta_a) < abs(theta_b):
        return theta_a
    if abs(theta_b) < abs(theta_a):
        return theta_b
    return max(theta_a, theta_b)


def apply_rotation(q1, q2, theta: float, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if abs(q1 @ q1 - 1) > tol or abs(q2 @ q2 - 1) > tol or abs(q1 @ q2) > tol:
        raise RotationError("rotation needs an orthonormal pair")
    c, s = math.cos(theta), math.sin(theta)
    return c * q1 + s * q2, -s * q1 + c * q2


def per(q1, q2, delta: float, lambda1: float, lambda2: float,
        index_low: int = 0, index_high: int = 1):
    """Rotate ``q1`` up to deviation ``delta`` against ``q2``.

    ``lambda1`` and ``lambda2`` are the quadratic forms ``q'Rq`` of the two
    vectors; their images after the rotation are ``gamma``-mixtures with
    ``gamma = cos(theta)**2``, which holds whenever ``q1'Rq2 == 0``.

    Returns ``(q1_hat, q2_hat, step)``.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    s1, s2 = float(q1.sum()), float(q2.sum())
    check_feasible(s1, s2, delta)
    theta = select_angle(*solve_rotation_angles(s1, s2, delta))
    q1_hat, q2_hat = apply_rotation(q1, q2, theta)
    gamma = math.cos(theta) ** 2
    step = RotationStep(
        index_low=index_low,
        index_high=index_high,
        s1=s1,
        s2=s2,
        theta=theta,
        gamma=gamma,
        T_before=(s1 * s1, s2 * s2),
        T_after=(float(q1_hat.sum()) ** 2, float(q2_hat.sum()) ** 2),
        lambda_before=(float(lambda1), float(lambda2)),
        lambda_after=(gamma * lambda1 + (1 - gamma) * lambda2,
                      (1 - gamma) * lambda1 + gamma * lambda2),
    )
    return q1_hat, q2_hat, step
