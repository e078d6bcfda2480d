"""
Rigid-body flight dynamics with a centre-of-mass offset.

Equations of motion in body axes::

    M v' + C(v) v = tau = tau0 - G(eta) + D v + B delta + f(v, delta)

with generalized velocity ``v = [V; omega]`` (ft/s, rad/s), earth pose
``eta = [X, Y, Z, phi, theta, psi]`` (NED, ft / rad) and generalized
momentum ``L = M v`` obeying ``tau = L' + S*(omega) L``.

The momentum equation linearized about a trim point is provided as ground
truth for the data-driven identifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ParameterError, SingularityError, TrimError

EPS_SING = 1e-3  # pitch guard [rad] away from +/- pi/2


def _frozen(a, shape, name):
    arr = np.array(a, dtype=float).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Physical and aerodynamic-derivative parameter set.

    Attributes
    ----------
    m : float
        Mass [slug].
    I_M : (3, 3) array
        Inertia matrix about the body origin [slug ft^2].
    rho : (3,) array
        Centre-of-mass displacement from the body origin [ft].
    g : float
        Gravity constant [ft/s^2].
    D : (6, 6) array
        Damping derivatives (force/moment per unit generalized velocity).
    B_eff : (6, 4) array
        Control effectiveness for ``[dT, d_ru, d_a, d_e]``.
    tau0 : (6,) array
        Constant (trim) generalized force.
    delta_min, delta_max : (4,) arrays
        Effector bounds.
    """

    m: float
    I_M: np.ndarray
    rho: np.ndarray
    g: float
    D: np.ndarray
    B_eff: np.ndarray
    tau0: np.ndarray
    delta_min: np.ndarray
    delta_max: np.ndarray

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "m", float(self.m))
        set_(self, "g", float(self.g))
        set_(self, "I_M", _frozen(self.I_M, (3, 3), "I_M"))
        set_(self, "rho", _frozen(self.rho, (3,), "rho"))
        set_(self, "D", _frozen(self.D, (6, 6), "D"))
        set_(self, "B_eff", _frozen(self.B_eff, (6, 4), "B_eff"))
        set_(self, "tau0", _frozen(self.tau0, (6,), "tau0"))
        set_(self, "delta_min", _frozen(self.delta_min, (4,), "delta_min"))
        set_(self, "delta_max", _frozen(self.delta_max, (4,), "delta_max"))
        if not self.m > 0:
            raise ParameterError(f"mass must be positive, got {self.m}")
        if not np.allclose(self.I_M, self.I_M.T, rtol=0, atol=1e-12 * np.abs(self.I_M).max()):
            raise ParameterError("I_M must be symmetric")
        if np.linalg.eigvalsh(self.I_M).min() <= 0:
            raise ParameterError("I_M must be positive definite")
        if not np.all(self.delta_min < self.delta_max):
            raise ParameterError("delta_min must be strictly below delta_max")

    @cached_property
    def M(self) -> np.ndarray:
        """Mass-inertia matrix (cached, read-only)."""
        mS = self.m * skew(self.rho)
        M = np.block([[self.m * np.eye(3), -mS], [mS, self.I_M]])
        if np.linalg.eigvalsh(M).min() <= 0:
            raise ParameterError("mass-inertia matrix is not positive definite; check rho against I_M")
        M.setflags(write=False)
        return M

    @cached_property
    def M_inv(self) -> np.ndarray:
        Mi = np.linalg.inv(self.M)
        Mi.setflags(write=False)
        return Mi

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def clip(self, delta):
        return np.clip(delta, self.delta_min, self.delta_max)


class PolynomialForce:
    """Additive generalized force ``f = F_v v + F_d delta + [v^T H_i v]_i``.

    Used to realize the additive uncertainty term; the Jacobians are exact.
    """

    def __init__(self, F_v=None, F_d=None, H=None):
        self.F_v = np.zeros((6, 6)) if F_v is None else np.asarray(F_v, float).reshape(6, 6)
        self.F_d = np.zeros((6, 4)) if F_d is None else np.asarray(F_d, float).reshape(6, 4)
        self.H = np.zeros((6, 6, 6)) if H is None else np.asarray(H, float).reshape(6, 6, 6)

    def __call__(self, v, delta):
        return self.F_v @ v + self.F_d @ delta + np.einsum("ijk,j,k->i", self.H, v, v)

    def jac_v(self, v, delta):
        return self.F_v + np.einsum("ijk,k->ij", self.H, v) + np.einsum("ijk,j->ik", self.H, v)

    def jac_delta(self, v, delta):
        return self.F_d


@dataclass(frozen=True)
class UncertaintySpec:
    """Sudden change of the external dynamics at ``t_event``.

    Before the event the plant is nominal. Afterwards ``D`` and ``B_eff``
    are scaled elementwise and ``f_add`` (if any) is added to the force.
    """

    t_event: float = np.inf
    D_scale: np.ndarray = field(default_factory=lambda: np.ones((6, 6)))
    B_scale: np.ndarray = field(default_factory=lambda: np.ones((6, 4)))
    f_add: Optional[PolynomialForce] = None

    def __post_init__(self):
        if not self.t_event >= 0:
            raise ParameterError("t_event must be non-negative")
        object.__setattr__(self, "D_scale", _frozen(self.D_scale, (6, 6), "D_scale"))
        object.__setattr__(self, "B_scale", _frozen(self.B_scale, (6, 4), "B_scale"))

    def active(self, t: float) -> bool:
        return t >= self.t_event

    def D(self, p: ModelParams, t: float):
        return p.D * self.D_scale if self.active(t) else p.D

    def B(self, p: ModelParams, t: float):
        return p.B_eff * self.B_scale if self.active(t) else p.B_eff

    def force(self, v, delta, t: float):
        if self.f_add is None or not self.active(t):
            return np.zeros(6)
        return self.f_add(v, delta)

    def force_jacobians(self, v, delta, t: float):
        if self.f_add is None or not self.active(t):
            return np.zeros((6, 6)), np.zeros((6, 4))
        return self.f_add.jac_v(v, delta), self.f_add.jac_delta(v, delta)


NOMINAL = UncertaintySpec()


class Trim(NamedTuple):
    v0: np.ndarray
    eta0: np.ndarray
    delta0: np.ndarray


# --------------------------------------------------------------------------
# Kinematic building blocks
# --------------------------------------------------------------------------


def skew(r) -> np.ndarray:
    """Matrix ``S(r)`` such that ``S(r) @ b == np.cross(r, b)``."""
    x, y, z = r
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _cross(a, b):
    # np.cross carries heavy per-call overhead for single 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def skew_star(omega) -> np.ndarray:
    """Block-diagonal ``diag(S(omega), S(omega))`` acting on a momentum 6-vector."""
    S = skew(omega)
    out = np.zeros((6, 6))
    out[:3, :3] = S
    out[3:, 3:] = S
    return out


def mass_inertia(p: ModelParams) -> np.ndarray:
    """Generalized mass-inertia matrix ``[[mI, -m S(rho)], [m S(rho), I_M]]``."""
    return p.M


def coriolis(p: ModelParams, v) -> np.ndarray:
    """Coriolis/centripetal matrix ``C(v)``; skew-symmetric by construction."""
    V, w = v[:3], v[3:]
    Sw = skew(w)
    C = np.empty((6, 6))
    C[:3, :3] = p.m * Sw
    C[:3, 3:] = C[3:, :3] = -p.m * skew(_cross(w, p.rho))
    C[3:, 3:] = -skew(p.I_M @ w) + p.m * skew(_cross(V, p.rho))
    return C


def coriolis_force(p: ModelParams, v) -> np.ndarray:
    """``C(v) v`` from cross products, without forming ``C``."""
    V, w = v[:3], v[3:]
    wr = _cross(w, p.rho)
    top = p.m * (_cross(w, V) - _cross(wr, w))
    bottom = -p.m * _cross(wr, V) - _cross(p.I_M @ w, w) + p.m * _cross(_cross(V, p.rho), w)
    return np.concatenate([top, bottom])


def coriolis_jacobian(p: ModelParams, v) -> np.ndarray:
    """Exact Jacobian of ``C(v) v`` with respect to ``v``.

    ``C`` is linear in ``v`` so ``d(C(v)v)/dv_k = C(e_k) v + C(v) e_k``.
    """
    cols = [coriolis(p, e) @ v for e in np.eye(6)]
    return coriolis(p, v) + np.column_stack(cols)


def weight_vector(p: ModelParams, eta2) -> np.ndarray:
    phi, theta = eta2[0], eta2[1]
    mg = p.m * p.g
    return mg * np.array([-np.sin(theta), np.cos(theta) * np.sin(phi), np.cos(theta) * np.cos(phi)])


def gravity_vector(p: ModelParams, eta2) -> np.ndarray:
    """``G(eta) = [-W; -S(rho) W]`` with ``W`` the body-axis weight."""
    W = weight_vector(p, eta2)
    return np.concatenate([-W, -skew(p.rho) @ W])


def _check_attitude(theta):
    if abs(np.cos(theta)) < np.sin(EPS_SING):
        raise SingularityError(f"pitch angle {theta:.6f} rad within {EPS_SING} rad of +/- pi/2")


def rotation_matrix(eta2) -> np.ndarray:
    """Body-to-earth rotation ``J1`` (z-y-x Euler sequence)."""
    phi, theta, psi = eta2
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    return np.array(
        [
            [cp * ct, -sp * cf + cp * st * sf, sp * sf + cp * cf * st],
            [sp * ct, cp * cf + sf * st * sp, -cp * sf + st * sp * cf],
            [-st, ct * sf, ct * cf],
        ]
    )


def _euler_rate_blocks(eta2):
    phi, theta = eta2[0], eta2[1]
    _check_attitude(theta)
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    tt = st / ct
    J2 = np.array([[1.0, sf * tt, cf * tt], [0.0, cf, -sf], [0.0, sf / ct, cf / ct]])
    J2_inv = np.array([[1.0, 0.0, -st], [0.0, cf, ct * sf], [0.0, -sf, ct * cf]])
    return J2, J2_inv


def euler_transform(eta2):
    """Return ``(J, J_inv)`` mapping body velocity to earth-frame rates.

    Raises :class:`SingularityError` when pitch is within ``EPS_SING`` of
    +/- 90 deg.
    """
    J1 = rotation_matrix(eta2)
    J2, J2_inv = _euler_rate_blocks(eta2)
    J = np.zeros((6, 6))
    J_inv = np.zeros((6, 6))
    J[:3, :3], J[3:, 3:] = J1, J2
    J_inv[:3, :3], J_inv[3:, 3:] = J1.T, J2_inv
    return J, J_inv


def euler_transform_rate(eta2, eta2_dot) -> np.ndarray:
    """Time derivative of ``J`` along an attitude-rate ``eta2_dot``.

    Uses ``J1' = J1 S(omega)`` and the analytic partials of ``J2``.
    """
    phi, theta = eta2[0], eta2[1]
    _, J2_inv = _euler_rate_blocks(eta2)
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    tt, sec2 = st / ct, 1.0 / ct**2
    dJ2_dphi = np.array([[0.0, cf * tt, -sf * tt], [0.0, -sf, -cf], [0.0, cf / ct, -sf / ct]])
    dJ2_dtheta = np.array([[0.0, sf * sec2, cf * sec2], [0.0, 0.0, 0.0], [0.0, sf * st * sec2, cf * st * sec2]])
    omega = J2_inv @ eta2_dot
    Jdot = np.zeros((6, 6))
    Jdot[:3, :3] = rotation_matrix(eta2) @ skew(omega)
    Jdot[3:, 3:] = dJ2_dphi * eta2_dot[0] + dJ2_dtheta * eta2_dot[1]
    return Jdot


def kinematics(eta2, v) -> np.ndarray:
    """Earth-frame pose rate ``eta' = J(eta2) v``."""
    J, _ = euler_transform(eta2)
    return J @ v


# --------------------------------------------------------------------------
# Forces, momentum and the equations of motion
# --------------------------------------------------------------------------


def external_force(p: ModelParams, v, eta, delta, unc: UncertaintySpec = NOMINAL, t: float = 0.0):
    """Right-hand side ``tau0 - G + D' v + B' delta + f``."""
    return (
        p.tau0
        - gravity_vector(p, eta[3:])
        + unc.D(p, t) @ v
        + unc.B(p, t) @ delta
        + unc.force(v, delta, t)
    )


def body_derivative(p: ModelParams, v, eta, delta, unc: UncertaintySpec = NOMINAL, t: float = 0.0):
    """Generalized acceleration ``v' = M^-1 (tau - C(v) v)``."""
    rhs = external_force(p, v, eta, delta, unc, t) - coriolis_force(p, v)
    return p.M_inv @ rhs


def momentum_of(p: ModelParams, v) -> np.ndarray:
    return p.M @ v


def generalized_force(p: ModelParams, v, v_dot) -> np.ndarray:
    """``tau = M v' + C(v) v`` (ground-truth force for logging)."""
    return mass_inertia(p) @ v_dot + coriolis(p, v) @ v


# --------------------------------------------------------------------------
# Trim and linearization
# --------------------------------------------------------------------------


def _trim_state(airspeed, alpha, gamma, psi):
    v = np.array([airspeed * np.cos(alpha), 0.0, airspeed * np.sin(alpha), 0.0, 0.0, 0.0])
    eta = np.array([0.0, 0.0, 0.0, 0.0, alpha + gamma, psi])
    return v, eta


def find_trim(
    p: ModelParams,
    airspeed: float,
    gamma: float = 0.0,
    psi: float = 0.0,
    unc: UncertaintySpec = NOMINAL,
    t: float = 0.0,
    alpha0: float = 0.0,
    delta0=None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> Trim:
    """Wings-level trim at fixed airspeed and flight-path angle.

    Damped Gauss-Newton on the acceleration residual over
    ``(delta, alpha)``, with pitch ``theta = alpha + gamma``.
    """
    M = mass_inertia(p)
    D, B = unc.D(p, t), unc.B(p, t)
    x = np.concatenate([np.zeros(4) if delta0 is None else np.asarray(delta0, float), [alpha0]])

    def residual(x):
        v, eta = _trim_state(airspeed, x[4], gamma, psi)
        return body_derivative(p, v, eta, x[:4], unc, t)

    r = residual(x)
    for _ in range(max_iter):
        if np.linalg.norm(r) < tol:
            break
        alpha = x[4]
        v, eta = _trim_state(airspeed, alpha, gamma, psi)
        dv_dalpha = airspeed * np.array([-np.sin(alpha), 0.0, np.cos(alpha), 0.0, 0.0, 0.0])
        Fv, Fd = unc.force_jacobians(v, x[:4], t)
        dW = p.m * p.g * np.array(
            [-np.cos(eta[4]), -np.sin(eta[4]) * np.sin(eta[3]), -np.sin(eta[4]) * np.cos(eta[3])]
        )
        dG = np.concatenate([-dW, -skew(p.rho) @ dW])
        dtau_dalpha = -dG + (D + Fv - coriolis_jacobian(p, v)) @ dv_dalpha
        Jac = np.linalg.solve(M, np.column_stack([B + Fd, dtau_dalpha]))
        step = np.linalg.lstsq(Jac, -r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            x_new = x + lam * step
            r_new = residual(x_new)
            if np.linalg.norm(r_new) < np.linalg.norm(r):
                break
            lam *= 0.5
        else:
            break
        x, r = x_new, r_new
    if not np.linalg.norm(r) < tol:
        raise TrimError(f"trim residual {np.linalg.norm(r):.3e} above {tol:.1e}")
    if np.any(x[:4] < p.delta_min) or np.any(x[:4] > p.delta_max):
        raise TrimError(f"trim command {np.round(x[:4], 4).tolist()} lies outside the effector box")
    v, eta = _trim_state(airspeed, x[4], gamma, psi)
    return Trim(v, eta, x[:4].copy())


def linearize_body(p: ModelParams, trim: Trim, unc: UncertaintySpec = NOMINAL, t: float = 0.0):
    """Jacobians ``(A_v, B_v)`` of ``v'`` with respect to ``v`` and ``delta``."""
    v0, _, d0 = trim
    Minv = p.M_inv
    Fv, Fd = unc.force_jacobians(v0, d0, t)
    A_v = Minv @ (unc.D(p, t) + Fv - coriolis_jacobian(p, v0))
    B_v = Minv @ (unc.B(p, t) + Fd)
    return A_v, B_v


def linearize_momentum(
    p: ModelParams, trim: Trim, unc: UncertaintySpec = NOMINAL, t: float = 0.0, trim_tol: float = 1e-7
):
    """Continuous-time momentum model ``dL' = A_L dL + B_L d(delta)`` at trim.

    ``A_L = A_Lv M^-1 + A_L0`` where ``A_Lv`` is the velocity partial of
    ``D v + f - S*(omega) L`` at fixed ``L`` and ``A_L0 = -S*(omega0)``.
    Matches the exact Jacobian of ``M v'`` when ``rho = 0``.
    """
    v0, eta0, d0 = trim
    vdot = body_derivative(p, v0, eta0, d0, unc, t)
    if np.linalg.norm(vdot) > trim_tol:
        raise TrimError(f"not an equilibrium: |v'| = {np.linalg.norm(vdot):.3e}")
    M = mass_inertia(p)
    L0 = M @ v0
    Fv, Fd = unc.force_jacobians(v0, d0, t)
    dSL = np.zeros((6, 6))
    # d(omega x l)/d(omega) = -S(l)
    dSL[:3, 3:] = -skew(L0[:3])
    dSL[3:, 3:] = -skew(L0[3:])
    A_Lv = unc.D(p, t) + Fv - dSL
    A_L0 = -skew_star(v0[3:])
    A_L = A_Lv @ p.M_inv + A_L0
    B_L = unc.B(p, t) + Fd
    return A_L, B_L
