"""Discrete-time LQR on the identified momentum model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RiccatiError


@dataclass(frozen=True)
class LqrWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        R = np.array(self.R, dtype=float)
        if Q.ndim == 1:
            Q = np.diag(Q)
        if R.ndim == 1:
            R = np.diag(R)
        if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() < -1e-12 * max(1.0, np.abs(Q).max()):
            raise ParameterError("Q must be symmetric positive semi-definite")
        if not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
            raise ParameterError("R must be symmetric positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class LqrGain:
    K: np.ndarray
    P1: np.ndarray
    spectral_radius: float


def dare_residual(A, B, Q, R, P) -> float:
    BtPA = B.T @ P @ A
    rhs = A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA) + Q
    return float(np.linalg.norm(P - rhs))


def solve_dare(A, B, w: LqrWeights, tol: float = 1e-10, max_iter: int = 100) -> LqrGain:
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Structured doubling: with ``G = B R^-1 B^T`` the triple ``(A_k, G_k, H_k)``
    is squared each sweep and ``H_k`` converges quadratically to ``P``.
    Raises :class:`RiccatiError` if ``(A, B)`` is not stabilizable or the
    iteration does not converge.
    """
    from .analysis import stabilizability

    A = np.asarray(A, float)
    B = np.asarray(B, float)
    Q, R = w.Q, w.R
    n = A.shape[0]
    if not stabilizability(A, B):
        raise RiccatiError("(A, B) is not stabilizable")

    Ak = A.copy()
    Gk = B @ np.linalg.solve(R, B.T)
    Hk = Q.copy()
    eye = np.eye(n)
    for _ in range(max_iter):
        W = eye + Gk @ Hk
        WiA = np.linalg.solve(W, Ak)
        WiG = np.linalg.solve(W, Gk)
        H_next = Hk + Ak.T @ Hk @ WiA
        Gk = Gk + Ak @ WiG @ Ak.T
        Ak = Ak @ WiA
        Gk = 0.5 * (Gk + Gk.T)
        H_next = 0.5 * (H_next + H_next.T)
        step = np.linalg.norm(H_next - Hk)
        Hk = H_next
        if not np.all(np.isfinite(Hk)):
            break
        if step <= 1e-3 * tol * max(1.0, np.linalg.norm(Hk)):
            break
    P = Hk
    if not np.all(np.isfinite(P)):
        raise RiccatiError("doubling iteration diverged")
    res = dare_residual(A, B, Q, R, P)
    if res >= tol * max(1.0, np.linalg.norm(P)):
        raise RiccatiError(f"DARE residual {res:.3e} after {max_iter} iterations")
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    rho = float(np.abs(np.linalg.eigvals(A - B @ K)).max())
    if rho >= 1.0:
        raise RiccatiError(f"closed loop not Schur stable (spectral radius {rho:.6f})")
    return LqrGain(K, P, rho)


def lqr_control(gain: LqrGain, L_meas, L_d, delta_base, bounds):
    """Effector command ``clip(delta_base - K (L_meas - L_d))``.

    Returns ``(delta, saturated)`` with a per-effector saturation mask.
    """
    lo, hi = bounds
    raw = np.asarray(delta_base, float) - gain.K @ (np.asarray(L_meas, float) - L_d)
    delta = np.clip(raw, lo, hi)
    return delta, (raw < lo) | (raw > hi)


def default_weights(p, trim, speed_frac: float = 0.01, rate: float = 0.05, range_frac: float = 1.0) -> LqrWeights:
    """Unit-consistent diagonal weights.

    Linear momentum is normalized by ``m * |V0| * speed_frac``, angular
    momentum by ``I_ii * rate`` and inputs by their range.
    """
    speed = np.linalg.norm(trim.v0[:3])
    scale = np.concatenate([np.full(3, p.m * speed * speed_frac), np.diag(p.I_M) * rate])
    span = (p.delta_max - p.delta_min) * range_frac
    return LqrWeights(np.diag(1.0 / scale**2), np.diag(1.0 / span**2))
