"""
Momentum pseudo-observation and windowed DMDc identification.

The observable is the momentum deviation itself, ``x = dL``, so the fitted
pair ``(A, B)`` is the discrete-time momentum model
``dL[k+1] = A dL[k] + B d_delta[k]`` valid over one window.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .dynamics import ModelParams, coriolis, mass_inertia, skew_star
from .errors import IdentificationError

M_MIN = 12
SV_TOL = 1e-8
RES_MAX = 1e-3


class Measurement(NamedTuple):
    """Measured body velocity, acceleration and angular rate."""

    v: np.ndarray
    v_dot: np.ndarray
    omega: np.ndarray

    @classmethod
    def from_state(cls, v, v_dot):
        v = np.asarray(v, float)
        return cls(v, np.asarray(v_dot, float), v[3:])


def _observation_rate(p_hat, M, meas: Measurement, L):
    return M @ meas.v_dot + coriolis(p_hat, meas.v) @ meas.v - skew_star(meas.omega) @ L


def pseudo_observe_momentum(
    prev_L, meas: Measurement, p_hat: ModelParams, dt: float, prev_meas: Optional[Measurement] = None
):
    """Advance the momentum pseudo-observation by one trapezoidal step.

    The integrand is ``M(p) v' + C(p, v) v - S*(omega) L``; the step is
    implicit in the end-point ``L``. Without ``prev_meas`` the start-point
    integrand is evaluated with the current measurement.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    M = mass_inertia(p_hat)
    prev = meas if prev_meas is None else prev_meas
    rate_prev = _observation_rate(p_hat, M, prev, prev_L)
    forcing = M @ meas.v_dot + coriolis(p_hat, meas.v) @ meas.v
    lhs = np.eye(6) + 0.5 * dt * skew_star(meas.omega)
    return np.linalg.solve(lhs, prev_L + 0.5 * dt * (rate_prev + forcing))


class MomentumObserver:
    """Running pseudo-observation; starts from ``M(p_hat) v(0)``."""

    def __init__(self, p_hat: ModelParams, meas0: Measurement):
        self.p_hat = p_hat
        self.L = mass_inertia(p_hat) @ meas0.v
        self._prev = meas0

    def update(self, meas: Measurement, dt: float):
        self.L = pseudo_observe_momentum(self.L, meas, self.p_hat, dt, self._prev)
        self._prev = meas
        return self.L


@dataclass(frozen=True)
class SnapshotWindow:
    """Column-aligned snapshot matrices: ``Xp[:, k]`` succeeds ``X[:, k]``."""

    X: np.ndarray
    Xp: np.ndarray
    U: np.ndarray
    Ts: float
    t: Optional[np.ndarray] = None
    x_ref: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.X.shape != self.Xp.shape or self.X.shape[1] != self.U.shape[1]:
            raise IdentificationError("snapshot matrices are not column-aligned")

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def to_csv(self, path) -> None:
        """Write one row per column: time, X, X', U."""
        n, q = self.X.shape[0], self.U.shape[0]
        t = self.t if self.t is not None else np.arange(self.m) * self.Ts
        header = ["t"] + [f"x{i}" for i in range(n)] + [f"xp{i}" for i in range(n)] + [f"u{i}" for i in range(q)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.m):
                w.writerow([repr(float(t[k]))] + [repr(float(x)) for x in np.concatenate([self.X[:, k], self.Xp[:, k], self.U[:, k]])])


class SnapshotBuffer:
    """Fixed-capacity ring buffer of ``(x, u)`` samples taken every ``Ts``.

    A full buffer of ``capacity`` samples yields a window of
    ``capacity - 1`` snapshot columns.
    """

    def __init__(self, capacity: int, Ts: float):
        if capacity < 2:
            raise ValueError("capacity must be at least 2")
        self.capacity = capacity
        self.Ts = Ts
        self._x = deque(maxlen=capacity)
        self._u = deque(maxlen=capacity)
        self._t = deque(maxlen=capacity)

    def __len__(self):
        return len(self._x)

    @property
    def m_pairs(self) -> int:
        return len(self._x)

    @property
    def full(self) -> bool:
        return len(self._x) == self.capacity

    def push(self, x, u, t: float = np.nan) -> "SnapshotBuffer":
        self._x.append(np.array(x, dtype=float))
        self._u.append(np.array(u, dtype=float))
        self._t.append(float(t))
        return self

    def clear(self):
        self._x.clear()
        self._u.clear()
        self._t.clear()

    def window(self, deviation: bool = True) -> SnapshotWindow:
        """Snapshot matrices from an immutable copy of the buffer.

        With ``deviation`` the states and inputs are taken relative to the
        window's opening sample.
        """
        if len(self._x) < 2:
            raise IdentificationError("need at least two samples for a window")
        xs = np.array(self._x).T
        us = np.array(self._u).T
        ref = None
        if deviation:
            ref = xs[:, 0].copy()
            xs = xs - xs[:, :1]
            us = us - us[:, :1]
        return SnapshotWindow(xs[:, :-1].copy(), xs[:, 1:].copy(), us[:, :-1].copy(), self.Ts, np.array(self._t)[:-1], ref)


def push_sample(buffer: SnapshotBuffer, x_k, u_k, t: float = np.nan) -> SnapshotBuffer:
    return buffer.push(x_k, u_k, t)


@dataclass(frozen=True)
class LinearMomentumModel:
    """Identified discrete pair with validity metadata."""

    A: np.ndarray
    B: np.ndarray
    Ts: float
    window_id: int = 0
    residual: float = np.nan
    valid: bool = False
    rank: int = 0
    inputs_excited: tuple = ()


def identify_dmdc(
    w: SnapshotWindow,
    sv_tol: float = SV_TOL,
    res_max: float = RES_MAX,
    m_min: int = M_MIN,
    window_id: int = 0,
    center: bool = True,
) -> LinearMomentumModel:
    """Least-squares ``[A B] = X' Omega^+`` with a truncated-SVD pseudo-inverse.

    Singular values below ``sv_tol * sigma_max`` are discarded. The model is
    flagged invalid when ``Omega = [X; U]`` is rank deficient, when the
    relative misfit exceeds ``res_max``. The misfit is relative to the
    successor states in absolute coordinates (``Xp + x_ref``), so taking
    deviations does not change it.  Fewer than ``m_min`` columns raise.
    """
    n, q = w.X.shape[0], w.U.shape[0]
    if w.m < m_min:
        raise IdentificationError(f"window has {w.m} columns, need at least {m_min}")
    # centring each block on its own mean absorbs the affine offset left by
    # an opening sample that is not an equilibrium
    X = w.X - w.X.mean(axis=1, keepdims=True) if center else w.X
    Xp = w.Xp - w.Xp.mean(axis=1, keepdims=True) if center else w.Xp
    U = w.U - w.U.mean(axis=1, keepdims=True) if center else w.U
    Omega = np.vstack([X, U])
    Uo, sig, Vt = np.linalg.svd(Omega, full_matrices=False)
    if sig[0] == 0.0:
        return LinearMomentumModel(np.eye(n), np.zeros((n, q)), w.Ts, window_id, np.inf, False, 0, (False,) * q)
    r = int(np.sum(sig >= sv_tol * sig[0]))
    excited = tuple(
        bool(r > _numerical_rank(np.delete(Omega, n + i, axis=0), sv_tol * sig[0])) for i in range(q)
    )
    G = (Xp @ Vt[:r].T / sig[:r]) @ Uo[:, :r].T
    misfit = np.linalg.norm(Xp - G @ Omega)
    Xp_abs = w.Xp if w.x_ref is None else w.Xp + np.asarray(w.x_ref, float)[:, None]
    scale = np.linalg.norm(Xp_abs)
    residual = misfit / scale if scale > 0 else misfit
    valid = r == n + q and residual <= res_max
    return LinearMomentumModel(G[:, :n], G[:, n:], w.Ts, window_id, float(residual), bool(valid), r, excited)


def _numerical_rank(a, abs_tol):
    return int(np.sum(np.linalg.svd(a, compute_uv=False) >= abs_tol))
