"""
Controllability, stabilizability and maneuverability of the momentum model.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import lsq_linear

from .errors import IdentificationError

RANK_TOL = 1e-9
FEAS_TOL = 1e-6


def controllability_matrix(A, B) -> np.ndarray:
    """``[B, AB, ..., A^(n-1) B]``."""
    A = np.asarray(A, float)
    B = np.asarray(B, float).reshape(A.shape[0], -1)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def numerical_rank(a, tol: float = RANK_TOL) -> int:
    sig = np.linalg.svd(np.atleast_2d(a), compute_uv=False)
    if sig.size == 0 or sig[0] == 0.0:
        return 0
    return int(np.sum(sig >= tol * sig[0]))


def controllability(A, B, tol: float = RANK_TOL):
    """Return ``(rank, controllable)`` of the pair ``(A, B)``."""
    n = np.asarray(A).shape[0]
    r = numerical_rank(controllability_matrix(A, B), tol)
    return r, r == n


def stabilizability(A, B, tol: float = RANK_TOL, discrete: bool = True) -> bool:
    """PBH test on every eigenvalue outside the stability region.

    Discrete time checks ``|lambda| >= 1``, continuous time
    ``Re(lambda) >= 0``; each such mode needs ``rank [A - lambda I, B] = n``.
    """
    A = np.asarray(A, float)
    n = A.shape[0]
    B = np.asarray(B, float).reshape(n, -1)
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2), 1.0)
    for lam in np.linalg.eigvals(A):
        unstable = abs(lam) >= 1.0 - 1e-12 if discrete else lam.real >= -1e-12
        if not unstable:
            continue
        pbh = np.hstack([A - lam * np.eye(n), B])
        sig = np.linalg.svd(pbh, compute_uv=False)
        if np.sum(sig >= tol * scale) < n:
            return False
    return True


class Maneuverability(NamedTuple):
    ok: bool
    margin: float
    residuals: np.ndarray
    margins: np.ndarray


def maneuverable(
    model,
    L_traj: Sequence,
    bounds,
    delta_base=None,
    L_ref=None,
    feas_tol: float = FEAS_TOL,
) -> Maneuverability:
    """One-step attainability of a reference momentum sequence.

    For each ``(L_d, L_d')`` sample the demand
    ``L_d[k+1] - A L_d[k]`` (``L_d[k+1] = L_d[k] + Ts L_d'``, deviations
    from ``L_ref``) is fitted by ``B d`` twice: with ``d`` free and with ``d``
    inside the effector box shifted by ``delta_base``.  A sample is attainable
    when the box adds less than ``feas_tol`` (relative) to the free misfit.
    The margin is the smallest normalized distance of the boxed solution to
    the box boundary (1 at the box centre, 0 on a face).
    """
    if not getattr(model, "valid", True):
        raise IdentificationError("maneuverability needs a valid momentum model")
    A, B, Ts = model.A, model.B, model.Ts
    lo, hi = (np.asarray(b, float) for b in bounds)
    base = np.zeros_like(lo) if delta_base is None else np.asarray(delta_base, float)
    lo_d, hi_d = lo - base, hi - base
    if np.any(lo_d > 0) or np.any(hi_d < 0):
        raise ValueError("delta_base lies outside the effector box")
    half = 0.5 * (hi_d - lo_d)
    ref = np.zeros(A.shape[0]) if L_ref is None else np.asarray(L_ref, float)
    B_pinv = np.linalg.pinv(B)
    residuals, margins = [], []
    for L_d, L_d_dot in L_traj:
        x = np.asarray(L_d, float) - ref
        demand = x + Ts * np.asarray(L_d_dot, float) - A @ x
        free = np.linalg.norm(B @ (B_pinv @ demand) - demand)
        sol = lsq_linear(B, demand, bounds=(lo_d, hi_d), method="bvls", tol=1e-14)
        boxed = np.linalg.norm(B @ sol.x - demand)
        scale = max(np.linalg.norm(demand), 1e-300)
        residuals.append((boxed - free) / scale)
        margins.append(np.min(np.minimum(sol.x - lo_d, hi_d - sol.x) / half))
    residuals = np.array(residuals)
    margins = np.array(margins)
    ok = bool(np.all(residuals < feas_tol))
    return Maneuverability(ok, float(margins.min()) if margins.size else 1.0, residuals, margins)


def composite_lyapunov(V_smc: float, L_err, P1) -> float:
    """``0.5 s^T M_eta s + 0.5 L~^T P1 L~`` given the sliding-mode part."""
    L_err = np.asarray(L_err, float)
    return float(V_smc + 0.5 * L_err @ P1 @ L_err)


class LyapunovCheck(NamedTuple):
    ok: bool
    n_steps: int
    n_violations: int
    max_increase: float
    tol: float


def lyapunov_monotonicity(t, V, events, dt: float, Ts: float) -> LyapunovCheck:
    """Check that ``V`` sampled every ``Ts`` is non-increasing between events.

    Pairs of consecutive samples that straddle an event time, or where
    ``V`` is undefined, are skipped.  An increase is tolerated up to the
    drift one integrator step of length ``dt`` can produce at the observed
    rate, i.e. ``max |dV/dt| * dt`` over the checked interval.
    """
    t = np.asarray(t, float)
    V = np.asarray(V, float)
    on_grid = np.abs(t / Ts - np.round(t / Ts)) < 1e-9
    t, V = t[on_grid], V[on_grid]
    events = np.sort(np.asarray(list(events), float))
    seg = np.searchsorted(events, t, side="right")
    keep = (seg[1:] == seg[:-1]) & np.isfinite(V[1:]) & np.isfinite(V[:-1])
    dV = np.diff(V)[keep]
    if dV.size == 0:
        return LyapunovCheck(True, 0, 0, 0.0, 0.0)
    tol = float(np.max(np.abs(dV)) / Ts * dt)
    bad = dV > tol
    return LyapunovCheck(not bool(np.any(bad)), int(dV.size), int(np.sum(bad)), float(dV.max()), tol)
