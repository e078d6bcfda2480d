"""
Closed-loop scenario runner.

The plant is integrated with RK4 at ``dt``; the digital controller runs at
``Ts`` with zero-order-hold effector commands.  Every ``Ts`` the sliding-mode
law produces ``tau_d`` and advances ``L_d``; the pseudo-observed momentum and
the applied command are pushed into the snapshot buffer; at the end of every
window of ``P_w`` seconds the momentum model is re-identified, certified and
(if valid and at or after ``t_on``) a new LQR gain is published.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .analysis import controllability
from .dynamics import (
    NOMINAL,
    ModelParams,
    Trim,
    UncertaintySpec,
    body_derivative,
    coriolis,
    euler_transform,
    external_force,
    find_trim,
    gravity_vector,
)
from .errors import ConfigError, IntegrationError, RiccatiError, SdacError
from .identification import (
    LinearMomentumModel,
    Measurement,
    MomentumObserver,
    SnapshotBuffer,
    identify_dmdc,
)
from .lqr import LqrGain, LqrWeights, default_weights, lqr_control, solve_dare
from .params import default_params
from .reference import EffectorSegment, ManeuverReference, SinusoidReference, TrimHold
from .smc import ReferenceMomentum, SmcGains, earth_transform, sliding_variable, smc_force

MODES = ("sdac", "smc_only")


def rk4_step(f: Callable, state, t: float, dt: float, k1=None):
    """Classical fourth-order Runge-Kutta step of ``x' = f(x, t)``.

    ``k1`` may carry a precomputed ``f(state, t)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    k1 = f(state, t) if k1 is None else k1
    k2 = f(state + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(state + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(state + dt * k3, t + dt)
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise IntegrationError(f"non-finite state derivative at t={t:.6f}")
    return state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def doublet_inputs(delta0, n: int, amplitude, rng) -> np.ndarray:
    """``n`` effector samples around ``delta0``: random levels, each held for
    one sample and then mirrored, so the excitation has zero mean every two
    samples and attitude excursions stay small."""
    amplitude = np.broadcast_to(np.asarray(amplitude, float), (len(delta0),))
    out = np.empty((n, len(delta0)))
    for k in range(n):
        if k % 2 == 0:
            level = amplitude * rng.uniform(-1.0, 1.0, len(delta0))
        out[k] = np.asarray(delta0, float) + (level if k % 2 == 0 else -level)
    return out


def open_loop_experiment(p: ModelParams, trim: Trim, inputs, Ts: float, dt: float, unc: UncertaintySpec = NOMINAL):
    """Fly the airframe from trim through an effector sequence held over ``Ts``.

    Returns a :class:`SnapshotBuffer` holding the true momentum and input at
    every sample.
    """
    inputs = np.asarray(inputs, float)
    n_sub = int(round(Ts / dt))
    buf = SnapshotBuffer(len(inputs), Ts)
    x = np.concatenate([trim.v0, trim.eta0])
    for k, d in enumerate(inputs):
        t = k * Ts
        buf.push(p.M @ x[:6], d, t)

        def f(x, t, d=d):
            return np.concatenate([body_derivative(p, x[:6], x[6:], d, unc, t), euler_transform(x[9:])[0] @ x[:6]])

        for j in range(n_sub):
            x = rk4_step(f, x, t + j * dt, dt)
    return buf


def default_damage() -> UncertaintySpec:
    """Severe combined damage at t = 20 s.

    Elevator and aileron lose half their authority, the rudder 30 %, roll
    and pitch damping drop, pitch stiffness rises and drag grows by half.
    Only rows the effectors act on (axial force and the three moments)
    are altered.
    """
    B_scale = np.ones((6, 4))
    B_scale[:, 3] = 0.5
    B_scale[:, 2] = 0.5
    B_scale[:, 1] = 0.7
    D_scale = np.ones((6, 6))
    D_scale[4, 2] = 1.6
    D_scale[4, 4] = 0.6
    D_scale[3, 3] = 0.6
    D_scale[0, 0] = 1.5
    return UncertaintySpec(t_event=20.0, D_scale=D_scale, B_scale=B_scale)


def default_maneuver() -> list:
    """Gentle climb followed by a banked turn."""
    return [
        EffectorSegment(effector=3, amplitude=-0.004, t_start=2.0, t_end=6.0, shape="step"),
        EffectorSegment(effector=0, amplitude=0.05, t_start=2.0, t_end=6.0, shape="step"),
        EffectorSegment(effector=2, amplitude=0.01, t_start=5.0, t_end=7.0, shape="pulse"),
        EffectorSegment(effector=1, amplitude=-0.004, t_start=5.0, t_end=8.0, shape="pulse"),
    ]


@dataclass
class ScenarioConfig:
    """Experiment definition (defaults mirror the damage experiment)."""

    params: ModelParams = field(default_factory=default_params)
    airspeed: float = 100.0
    dt: float = 0.005
    Ts: float = 0.02
    P_w: float = 2.0
    t_on: float = 10.0
    duration: float = 40.0
    uncertainty: UncertaintySpec = field(default_factory=default_damage)
    reference: dict = field(default_factory=lambda: {"kind": "maneuver"})
    gains: Optional[SmcGains] = None
    weights: Optional[LqrWeights] = None
    mode: str = "sdac"
    rng_seed: int = 0
    dither: np.ndarray = field(default_factory=lambda: np.full(4, 0.005))
    noise_v: float = 0.0
    noise_vdot: float = 0.0
    initial_offset: np.ndarray = field(default_factory=lambda: np.zeros(12))
    sv_tol: float = 1e-8
    res_max: float = 1e-3
    dare_tol: float = 1e-10
    dare_max_iter: int = 100
    rank_tol: float = 1e-9

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (0 < self.dt <= self.Ts):
            raise ConfigError("need 0 < dt <= Ts")
        n_sub = self.Ts / self.dt
        if abs(n_sub - round(n_sub)) > 1e-9:
            raise ConfigError("Ts must be an integer multiple of dt")
        n_win = self.P_w / self.Ts
        if abs(n_win - round(n_win)) > 1e-9 or round(n_win) < 12:
            raise ConfigError("P_w must be an integer multiple of Ts spanning at least 12 samples")
        if self.t_on < 0 or self.duration <= 0:
            raise ConfigError("t_on must be >= 0 and duration > 0")
        if np.isfinite(self.uncertainty.t_event) and self.duration <= self.uncertainty.t_event:
            raise ConfigError("duration must exceed the uncertainty event time")
        return self


LOG_COLUMNS = (
    ["t"]
    + [f"v{i}" for i in range(6)]
    + [f"eta{i}" for i in range(6)]
    + [f"L{i}" for i in range(6)]
    + [f"L_obs{i}" for i in range(6)]
    + [f"L_d{i}" for i in range(6)]
    + [f"delta{i}" for i in range(4)]
    + [f"tau_d{i}" for i in range(6)]
    + ["ctrb"]
    + [f"sat{i}" for i in range(4)]
    + ["residual", "window_id"]
    + [f"eta_d{i}" for i in range(6)]
    + [f"v_d{i}" for i in range(6)]
    + ["gain_id", "V_smc", "V_lqr"]
)


@dataclass
class PublishedModel:
    t: float
    model: LinearMomentumModel
    rank: int
    controllable: bool
    gain: Optional[LqrGain]
    published: bool
    delta_base: np.ndarray


@dataclass
class SimLog:
    """Uniform-grid time series plus the identification history."""

    data: np.ndarray
    models: list
    trim: Trim
    mode: str

    def __post_init__(self):
        self._index = {name: i for i, name in enumerate(LOG_COLUMNS)}

    def col(self, prefix: str, n: Optional[int] = None) -> np.ndarray:
        """Column ``prefix`` or, with ``n``, the block ``prefix0..prefix{n-1}``."""
        if n is None:
            return self.data[:, self._index[prefix]]
        i0 = self._index[f"{prefix}0"]
        return self.data[:, i0 : i0 + n]

    @property
    def t(self):
        return self.col("t")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for row in self.data:
                w.writerow([repr(float(x)) for x in row])


def build_reference(cfg: ScenarioConfig, trim: Trim):
    spec = dict(cfg.reference)
    kind = spec.pop("kind", "maneuver")
    if kind == "trim_hold":
        return TrimHold(trim)
    if kind == "sinusoid":
        from .reference import Sinusoid

        return SinusoidReference(trim, [Sinusoid(**s) for s in spec.get("segments", [])])
    if kind == "maneuver":
        segs = spec.get("segments")
        segs = default_maneuver() if segs is None else [EffectorSegment(**s) for s in segs]
        return ManeuverReference(cfg.params, trim, segs, cfg.duration + cfg.Ts, cfg.Ts)
    raise ConfigError(f"unknown reference kind {kind!r}")


def natural_force(p: ModelParams, v, eta):
    """Nominal external force with the effectors at zero."""
    return p.tau0 - gravity_vector(p, eta[3:]) + p.D @ v


def allocate(p: ModelParams, B_pinv, tau_d, v, eta):
    """Model-based allocation with the nominal (pre-damage) external model."""
    return B_pinv @ (tau_d - natural_force(p, v, eta))


def run_scenario(cfg: ScenarioConfig, reference=None) -> SimLog:
    """Execute one closed-loop run and return its log."""
    cfg.validate()
    p = cfg.params
    unc = cfg.uncertainty
    trim = find_trim(p, cfg.airspeed)
    ref = build_reference(cfg, trim) if reference is None else reference
    gains = cfg.gains or SmcGains.default(p)
    weights = cfg.weights or default_weights(p, trim)
    rng = np.random.default_rng(cfg.rng_seed)
    bounds = (p.delta_min, p.delta_max)
    B_pinv = np.linalg.pinv(p.B_eff)

    n_sub = int(round(cfg.Ts / cfg.dt))
    n_win = int(round(cfg.P_w / cfg.Ts))
    n_ctrl = int(round(cfg.duration / cfg.Ts))
    dt = cfg.dt

    x = np.concatenate([trim.v0, trim.eta0]) + cfg.initial_offset
    delta = np.array(trim.delta0, dtype=float)

    def deriv(x, t):
        v, eta = x[:6], x[6:]
        J, _ = euler_transform(eta[3:])
        return np.concatenate([body_derivative(p, v, eta, delta, unc, t), J @ v])

    def measure(x, xdot):
        v, vdot = x[:6].copy(), xdot[:6].copy()
        if cfg.noise_v > 0:
            v = v + rng.normal(0.0, cfg.noise_v, 6)
        if cfg.noise_vdot > 0:
            vdot = vdot + rng.normal(0.0, cfg.noise_vdot, 6)
        return Measurement(v, vdot, v[3:])

    xdot = deriv(x, 0.0)
    observer = MomentumObserver(p, measure(x, xdot))
    L_d = ReferenceMomentum(p.M @ x[:6])
    buffer = SnapshotBuffer(n_win + 1, cfg.Ts)

    gain: Optional[LqrGain] = None
    P1 = None
    delta_base = delta.copy()
    ctrb_flag = -1
    residual = np.nan
    window_id = 0
    gain_id = 0
    sdac_on = False
    models = []
    rows = []
    tau_d = np.zeros(6)
    sat = np.zeros(4, dtype=bool)
    V_smc = V_lqr = 0.0

    for k in range(n_ctrl + 1):
        t = k * cfg.Ts
        v, eta = x[:6], x[6:]
        tau_d = smc_force(p, gains, eta, v, ref, t)
        natural = natural_force(p, v, eta)
        cmd = np.clip(B_pinv @ (tau_d - natural), *bounds)
        # only the part of tau_d the nominal effectors can deliver feeds L_d
        tau_att = natural + p.B_eff @ cmd
        omega_meas = observer._prev.omega
        if t >= cfg.t_on - 1e-12:
            if not sdac_on:
                L_d.reset(observer.L)
                sdac_on = True
            else:
                L_d.step(tau_att, omega_meas, cfg.Ts)
        else:
            L_d.reset(observer.L)

        sat = np.zeros(4, dtype=bool)
        if cfg.mode == "sdac" and gain is not None:
            cmd, sat = lqr_control(gain, observer.L, L_d.L, delta_base, bounds)
        dither = cfg.dither * rng.uniform(-1.0, 1.0, 4)
        delta = np.clip(cmd + dither, *bounds)

        eta_d, eta_d_dot, _ = ref(t)
        s, _ = sliding_variable(eta, euler_transform(eta[3:])[0] @ v, eta_d, eta_d_dot, gains.Lambda)
        M_eta, _ = earth_transform(p, eta, v)
        V_smc = 0.5 * s @ M_eta @ s
        L_err = observer.L - L_d.L
        V_lqr = 0.5 * L_err @ P1 @ L_err if P1 is not None else np.nan

        buffer.push(observer.L, delta, t)
        if k > 0 and k % n_win == 0 and buffer.full:
            window_id += 1
            model = identify_dmdc(buffer.window(), cfg.sv_tol, cfg.res_max, window_id=window_id)
            rank, ctrb = controllability(model.A, model.B, cfg.rank_tol)
            new_gain, published = None, False
            if model.valid:
                ctrb_flag = int(ctrb)
                residual = model.residual
                if t >= cfg.t_on - 1e-12 and ctrb:
                    try:
                        new_gain = solve_dare(model.A, model.B, weights, cfg.dare_tol, cfg.dare_max_iter)
                    except RiccatiError:
                        new_gain = None
                if new_gain is not None:
                    gain, P1 = new_gain, new_gain.P1
                    gain_id = window_id
                    delta_base = cmd.copy()
                    published = True
            models.append(PublishedModel(t, model, rank, ctrb, new_gain, published, delta_base.copy()))

        _, J_inv_d = euler_transform(eta_d[3:])
        v_d = J_inv_d @ eta_d_dot
        if k == n_ctrl:
            rows.append(_row(t, x, p, observer.L, L_d.L, delta, tau_d, ctrb_flag, sat, residual, window_id, eta_d, v_d, gain_id, V_smc, V_lqr))
            break
        for j in range(n_sub):
            tj = t + j * dt
            if j > 0:
                eta_d, eta_d_dot, _ = ref(tj)
                _, J_inv_d = euler_transform(eta_d[3:])
                v_d = J_inv_d @ eta_d_dot
            rows.append(_row(tj, x, p, observer.L, L_d.L, delta, tau_d, ctrb_flag, sat, residual, window_id, eta_d, v_d, gain_id, V_smc, V_lqr))
            # the command changes at j == 0, so the cached derivative is stale there
            x = rk4_step(deriv, x, tj, dt, k1=deriv(x, tj) if j == 0 else xdot)
            xdot = deriv(x, tj + dt)
            observer.update(measure(x, xdot), dt)
        if abs(np.cos(x[10])) < 1e-3:
            raise SdacError(f"attitude reached the Euler singularity at t={t:.3f}")

    return SimLog(np.array(rows), models, trim, cfg.mode)


def _row(t, x, p, L_obs, L_d, delta, tau_d, ctrb, sat, residual, window_id, eta_d, v_d, gain_id, V_smc, V_lqr):
    return np.concatenate(
        [
            [t],
            x[:6],
            x[6:],
            p.M @ x[:6],
            L_obs,
            L_d,
            delta,
            tau_d,
            [ctrb],
            sat.astype(float),
            [residual, window_id],
            eta_d,
            v_d,
            [gain_id, V_smc, V_lqr],
        ]
    )


@dataclass
class Metrics:
    t_from: float
    t_to: float
    rms_eta: np.ndarray
    max_eta: np.ndarray
    rms_v: np.ndarray
    max_v: np.ndarray
    rms_L: np.ndarray
    max_L: np.ndarray
    saturation_duty: np.ndarray

    @property
    def momentum_rms(self) -> float:
        """Aggregate momentum-tracking RMS, ``sqrt(mean ||L - L_d||^2)``."""
        return float(np.sqrt(np.sum(self.rms_L**2)))

    def as_rows(self, label: str = ""):
        rows = []
        for name in ("rms_eta", "max_eta", "rms_v", "max_v", "rms_L", "max_L", "saturation_duty"):
            vals = getattr(self, name)
            for i, val in enumerate(vals):
                rows.append([label, name, i, float(val)])
        rows.append([label, "momentum_rms", -1, self.momentum_rms])
        return rows


def metrics(log: SimLog, t_from: float, t_to: float) -> Metrics:
    """RMS and peak tracking errors over ``[t_from, t_to]``."""
    t = log.t
    sel = (t >= t_from - 1e-12) & (t <= t_to + 1e-12)
    if not np.any(sel):
        raise SdacError(f"no log samples in [{t_from}, {t_to}]")
    from .smc import wrap_angle

    e_eta = log.col("eta", 6)[sel] - log.col("eta_d", 6)[sel]
    e_eta[:, 3:] = wrap_angle(e_eta[:, 3:])
    e_v = log.col("v", 6)[sel] - log.col("v_d", 6)[sel]
    e_L = log.col("L", 6)[sel] - log.col("L_d", 6)[sel]

    def rms(e):
        return np.sqrt(np.mean(e**2, axis=0))

    return Metrics(
        t_from,
        t_to,
        rms(e_eta),
        np.abs(e_eta).max(axis=0),
        rms(e_v),
        np.abs(e_v).max(axis=0),
        rms(e_L),
        np.abs(e_L).max(axis=0),
        log.col("sat", 4)[sel].mean(axis=0),
    )
