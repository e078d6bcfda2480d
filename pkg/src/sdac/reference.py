"""
Earth-frame reference signals ``t -> (eta_d, eta_d', eta_d'')``.

Three families are provided:

* :class:`TrimHold` - straight steady flight at the trim condition;
* :class:`SinusoidReference` - trim hold plus smoothly windowed sinusoids
  on selected pose components (purely kinematic, not necessarily
  attainable with four effectors);
* :class:`ManeuverReference` - the nominal airframe flown through a smooth
  effector schedule, so the pose history is attainable by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .dynamics import (
    ModelParams,
    Trim,
    body_derivative,
    euler_transform,
    euler_transform_rate,
)


class TrimHold:
    def __init__(self, trim: Trim):
        J, _ = euler_transform(trim.eta0[3:])
        self.eta0 = np.array(trim.eta0, dtype=float)
        self.rate = J @ trim.v0

    def __call__(self, t):
        return self.eta0 + self.rate * t, self.rate.copy(), np.zeros(6)


def _smoothstep(x):
    """C2 ramp 0 -> 1 on [0, 1] with its first two derivatives."""
    x = np.clip(x, 0.0, 1.0)
    s = x**3 * (10 - 15 * x + 6 * x**2)
    ds = 30 * x**2 * (1 - x) ** 2
    dds = 60 * x * (1 - x) * (1 - 2 * x)
    return s, ds, dds


@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * sin(2 pi (t - t_start) / period)`` on one pose axis,
    faded in over ``ramp`` seconds from ``t_start`` and out before ``t_end``."""

    axis: int
    amplitude: float
    period: float
    t_start: float
    t_end: float
    ramp: float = 2.0


class SinusoidReference:
    def __init__(self, trim: Trim, segments: Sequence[Sinusoid]):
        self.base = TrimHold(trim)
        self.segments = list(segments)

    def __call__(self, t):
        eta, deta, ddeta = self.base(t)
        for seg in self.segments:
            w = 2 * np.pi / seg.period
            tau = t - seg.t_start
            a, da, dda = seg.amplitude * np.sin(w * tau), seg.amplitude * w * np.cos(w * tau), -seg.amplitude * w**2 * np.sin(w * tau)
            up, dup, ddup = _smoothstep(tau / seg.ramp)
            dn, ddn, dddn = _smoothstep((seg.t_end - t) / seg.ramp)
            dup, ddup = dup / seg.ramp, ddup / seg.ramp**2
            ddn, dddn = -ddn / seg.ramp, dddn / seg.ramp**2
            win = up * dn
            dwin = dup * dn + up * ddn
            ddwin = ddup * dn + 2 * dup * ddn + up * dddn
            eta[seg.axis] += win * a
            deta[seg.axis] += dwin * a + win * da
            ddeta[seg.axis] += ddwin * a + 2 * dwin * da + win * dda
        return eta, deta, ddeta


@dataclass(frozen=True)
class EffectorSegment:
    """Smooth effector excursion added to the trim command.

    ``shape='step'`` ramps from 0 to ``amplitude`` over ``[t_start, t_end]``
    and holds; ``shape='pulse'`` rises and returns to 0 within the interval.
    """

    effector: int
    amplitude: float
    t_start: float
    t_end: float
    shape: str = "pulse"

    def value(self, t):
        span = self.t_end - self.t_start
        x = (t - self.t_start) / span
        if self.shape == "step":
            return self.amplitude * _smoothstep(x)[0]
        if self.shape == "pulse":
            if x <= 0.0 or x >= 1.0:
                return 0.0
            return self.amplitude * 0.5 * (1 - np.cos(2 * np.pi * x))
        raise ValueError(f"unknown segment shape {self.shape!r}")


def effector_schedule(trim: Trim, segments: Sequence[EffectorSegment]):
    def delta(t):
        d = np.array(trim.delta0, dtype=float)
        for seg in segments:
            d[seg.effector] += seg.value(t)
        return d

    return delta


class ManeuverReference:
    """Pose history of the nominal airframe under an effector schedule.

    The airframe is integrated with RK4 on a ``dt`` grid from trim; between
    grid points pose and pose rate use cubic Hermite interpolation and the
    acceleration is interpolated linearly.
    """

    def __init__(self, p: ModelParams, trim: Trim, segments: Sequence[EffectorSegment], duration: float, dt: float = 0.005):
        from .sim import rk4_step

        self.segments = list(segments)
        self.delta = effector_schedule(trim, self.segments)
        n = int(round(duration / dt)) + 1
        t = np.arange(n) * dt
        x = np.concatenate([trim.v0, trim.eta0])

        def f(x, t):
            v, eta = x[:6], x[6:]
            J, _ = euler_transform(eta[3:])
            return np.concatenate([body_derivative(p, v, eta, self.delta(t)), J @ v])

        eta = np.empty((n, 6))
        deta = np.empty((n, 6))
        ddeta = np.empty((n, 6))
        for k in range(n):
            v, e = x[:6], x[6:]
            J, _ = euler_transform(e[3:])
            vdot = body_derivative(p, v, e, self.delta(t[k]))
            eta[k] = e
            deta[k] = J @ v
            ddeta[k] = euler_transform_rate(e[3:], deta[k, 3:]) @ v + J @ vdot
            if k + 1 < n:
                x = rk4_step(f, x, t[k], dt)
        self.t = t
        self.duration = t[-1]
        self._eta = CubicHermiteSpline(t, eta, deta, axis=0)
        self._deta = CubicHermiteSpline(t, deta, ddeta, axis=0)
        self._t, self._ddeta = t, ddeta

    def __call__(self, t):
        if t < 0 or t > self.duration + 1e-9:
            raise ValueError(f"reference requested at t={t} outside [0, {self.duration}]")
        dd = np.array([np.interp(t, self._t, self._ddeta[:, i]) for i in range(6)])
        return self._eta(t), self._deta(t), dd
