"""
Robust sliding-mode control of the internal (rigid-body) dynamics.

The law works on the earth-frame form ``M_eta eta'' + C_eta eta' = tau_eta``
and returns the desired body-axis generalized force ``tau_d``.  Integrating
the momentum relation under ``tau_d`` yields the reference momentum ``L_d``
handed to the momentum regulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    ModelParams,
    coriolis,
    euler_transform,
    euler_transform_rate,
    mass_inertia,
    skew_star,
)
from .errors import ParameterError


@dataclass(frozen=True)
class SmcGains:
    """Diagonal sliding-surface slope ``Lambda``, damping ``Gamma``,
    disturbance bound ``chi`` and boundary-layer width ``eps``."""

    Lambda: np.ndarray
    Gamma: np.ndarray
    chi: float = 0.0
    eps: float = 0.05

    def __post_init__(self):
        lam = np.array(self.Lambda, dtype=float).reshape(6)
        gam = np.array(self.Gamma, dtype=float).reshape(6)
        if np.any(lam <= 0) or np.any(gam <= 0):
            raise ParameterError("Lambda and Gamma entries must be positive")
        if self.chi < 0:
            raise ParameterError("chi must be non-negative")
        if not self.eps > 0:
            raise ParameterError("eps must be positive")
        lam.setflags(write=False)
        gam.setflags(write=False)
        object.__setattr__(self, "Lambda", lam)
        object.__setattr__(self, "Gamma", gam)
        object.__setattr__(self, "chi", float(self.chi))
        object.__setattr__(self, "eps", float(self.eps))

    @classmethod
    def default(cls, p: ModelParams, rate: float = 0.5) -> "SmcGains":
        """``Lambda = 0.8 I`` and ``Gamma`` proportional to the mass-inertia
        diagonal with ``min(Gamma) / max eig(M) >= rate``."""
        M = mass_inertia(p)
        diag = np.diag(M)
        scale = rate * np.linalg.eigvalsh(M).max() / diag.min()
        return cls(Lambda=np.full(6, 0.8), Gamma=scale * diag, chi=0.0, eps=0.05)


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def tracking_error(eta, eta_d):
    """``eta - eta_d`` with Euler-angle components wrapped to (-pi, pi]."""
    err = np.asarray(eta, float) - eta_d
    err[3:] = wrap_angle(err[3:])
    return err


def earth_transform(p: ModelParams, eta, v):
    """Earth-frame inertia ``M_eta`` and Coriolis ``C_eta`` matrices.

    ``M_eta = J^-T M J^-1`` and ``C_eta = J^-T (C - M J^-1 J') J^-1``.
    """
    J, J_inv = euler_transform(eta[3:])
    eta_dot = J @ v
    Jdot = euler_transform_rate(eta[3:], eta_dot[3:])
    M = mass_inertia(p)
    M_eta = J_inv.T @ M @ J_inv
    C_eta = J_inv.T @ (coriolis(p, v) - M @ J_inv @ Jdot) @ J_inv
    return M_eta, C_eta


def earth_mass_rate(p: ModelParams, eta, v):
    """Analytic ``d/dt M_eta`` along the motion, via ``(J^-1)' = -J^-1 J' J^-1``."""
    J, J_inv = euler_transform(eta[3:])
    Jdot = euler_transform_rate(eta[3:], (J @ v)[3:])
    M = mass_inertia(p)
    dJ_inv = -J_inv @ Jdot @ J_inv
    return dJ_inv.T @ M @ J_inv + J_inv.T @ M @ dJ_inv


def sliding_variable(eta, eta_dot, eta_d, eta_d_dot, Lambda):
    vartheta = eta_d_dot - Lambda * tracking_error(eta, eta_d)
    return eta_dot - vartheta, vartheta


def robust_term(s, chi, eps):
    """Boundary-layer robust term ``-chi tanh(s / eps)``."""
    return -chi * np.tanh(np.asarray(s) / eps)


def smc_force(p: ModelParams, gains: SmcGains, eta, v, ref, t):
    """Desired generalized force ``tau_d = J^T (M_eta th' + C_eta th - Gamma s + u0)``.

    ``ref(t)`` returns ``(eta_d, eta_d', eta_d'')``.
    """
    eta_d, eta_d_dot, eta_d_ddot = ref(t)
    J, _ = euler_transform(eta[3:])
    eta_dot = J @ v
    s, vartheta = sliding_variable(eta, eta_dot, eta_d, eta_d_dot, gains.Lambda)
    vartheta_dot = eta_d_ddot - gains.Lambda * (eta_dot - eta_d_dot)
    M_eta, C_eta = earth_transform(p, eta, v)
    u0 = robust_term(s, gains.chi, gains.eps)
    return J.T @ (M_eta @ vartheta_dot + C_eta @ vartheta - gains.Gamma * s + u0)


def lyapunov_smc(p: ModelParams, gains: SmcGains, eta, v, ref, t) -> float:
    """``V = 0.5 s^T M_eta s``."""
    eta_d, eta_d_dot, _ = ref(t)
    J, _ = euler_transform(eta[3:])
    s, _ = sliding_variable(eta, J @ v, eta_d, eta_d_dot, gains.Lambda)
    M_eta, _ = earth_transform(p, eta, v)
    return 0.5 * s @ M_eta @ s


def reference_momentum(tau_d, omega_meas, L_d_prev, dt, tau_prev=None, omega_prev=None):
    """One trapezoidal step of ``L_d' = tau_d - S*(omega) L_d``.

    The step is implicit in the end-point ``L_d``; the start-point
    integrand uses ``tau_prev``/``omega_prev`` (defaulting to the current
    values).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    tau_d = np.asarray(tau_d, float)
    tau_prev = tau_d if tau_prev is None else np.asarray(tau_prev, float)
    omega_prev = omega_meas if omega_prev is None else omega_prev
    rate_prev = tau_prev - skew_star(omega_prev) @ L_d_prev
    lhs = np.eye(6) + 0.5 * dt * skew_star(omega_meas)
    return np.linalg.solve(lhs, L_d_prev + 0.5 * dt * (rate_prev + tau_d))


class ReferenceMomentum:
    """Integrator state for ``L_d``, re-initialized when SDAC switches on."""

    def __init__(self, L0):
        self.L = np.array(L0, dtype=float)
        self._tau = None
        self._omega = None

    def reset(self, L0):
        self.L = np.array(L0, dtype=float)
        self._tau = None
        self._omega = None

    def step(self, tau_d, omega, dt):
        self.L = reference_momentum(tau_d, omega, self.L, dt, self._tau, self._omega)
        self._tau = np.array(tau_d, dtype=float)
        self._omega = np.array(omega, dtype=float)
        return self.L
