import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sdac.dynamics import coriolis, euler_transform, kinematics, skew_star
from sdac.errors import ParameterError
from sdac.reference import Sinusoid, SinusoidReference, TrimHold
from sdac.sim import rk4_step
from sdac.smc import (
    ReferenceMomentum,
    SmcGains,
    earth_mass_rate,
    earth_transform,
    reference_momentum,
    robust_term,
    sliding_variable,
    smc_force,
    tracking_error,
)

from conftest import fully_actuated_run, random_params


@pytest.fixture(scope="module")
def maneuver(trim):
    return SinusoidReference(
        trim,
        [Sinusoid(axis=3, amplitude=0.2, period=6.0, t_start=0.0, t_end=30.0), Sinusoid(axis=2, amplitude=20.0, period=8.0, t_start=0.0, t_end=30.0)],
    )


def offset_state(trim, eta_off, v_off):
    return np.concatenate([trim.v0 + v_off, trim.eta0 + eta_off])


class TestGains:
    def test_default_rate(self, params):
        g = SmcGains.default(params)
        assert np.all(g.Lambda == 0.8)
        assert g.Gamma.min() / np.linalg.eigvalsh(params.M).max() >= 0.5 - 1e-12
        assert g.chi == 0.0 and g.eps == 0.05

    def test_validation(self):
        with pytest.raises(ParameterError):
            SmcGains(np.ones(6), -np.ones(6))
        with pytest.raises(ParameterError):
            SmcGains(np.ones(6), np.ones(6), chi=-1.0)
        with pytest.raises(ParameterError):
            SmcGains(np.ones(6), np.ones(6), eps=0.0)


class TestEarthTransform:
    def test_level_at_rest(self, params):
        M_eta, C_eta = earth_transform(params, np.zeros(6), np.zeros(6))
        np.testing.assert_allclose(M_eta, params.M, atol=1e-15)
        assert not C_eta.any()

    def test_level_attitude_no_rates(self, params):
        M_eta, _ = earth_transform(params, np.zeros(6), np.array([50.0, 1.0, 2.0, 0, 0, 0]))
        np.testing.assert_allclose(M_eta, params.M, atol=1e-14)

    def test_mass_rate_matches_finite_difference(self, params, rng):
        for _ in range(10):
            eta = np.concatenate([rng.normal(size=3), rng.uniform(-1, 1, 3)])
            v = rng.normal(size=6)
            J, _ = euler_transform(eta[3:])
            eta_dot = J @ v
            h = 1e-6
            Mp, _ = earth_transform(params, eta + h * eta_dot, v)
            Mm, _ = earth_transform(params, eta - h * eta_dot, v)
            np.testing.assert_allclose(earth_mass_rate(params, eta, v), (Mp - Mm) / (2 * h), atol=1e-6)

    def test_skew_property_random(self, rng):
        for _ in range(200):
            p = random_params(rng)
            eta = np.concatenate([rng.normal(size=3), rng.uniform(-1.4, 1.4, 3)])
            v = rng.normal(scale=5, size=6)
            _, C_eta = earth_transform(p, eta, v)
            N = earth_mass_rate(p, eta, v) - 2 * C_eta
            assert np.linalg.norm(N + N.T) < 1e-9


class TestControlLaw:
    def test_perfect_tracking_is_feedforward(self, params, trim, maneuver):
        t = 3.0
        eta_d, eta_d_dot, eta_d_ddot = maneuver(t)
        _, J_inv = euler_transform(eta_d[3:])
        v = J_inv @ eta_d_dot
        gains = SmcGains.default(params)
        s, vartheta = sliding_variable(eta_d, eta_d_dot, eta_d, eta_d_dot, gains.Lambda)
        assert not s.any()
        J, _ = euler_transform(eta_d[3:])
        M_eta, C_eta = earth_transform(params, eta_d, v)
        expected = J.T @ (M_eta @ eta_d_ddot + C_eta @ eta_d_dot)
        np.testing.assert_allclose(smc_force(params, gains, eta_d, v, maneuver, t), expected, atol=1e-10)

    @given(arrays(np.float64, 6, elements=st.floats(-1e6, 1e6)), st.floats(0, 100), st.floats(1e-4, 10))
    def test_robust_term_bounded(self, s, chi, eps):
        assert np.abs(robust_term(s, chi, eps)).max() <= chi

    def test_angle_wrap(self):
        err = tracking_error(np.array([0, 0, 0, 0, 0, np.pi - 0.1]), np.array([0, 0, 0, 0, 0, -np.pi + 0.1]))
        assert np.isclose(err[5], -0.2)


class TestClosedLoop:
    def test_exponential_bound(self, params, trim, maneuver):
        gains = SmcGains.default(params)
        x0 = offset_state(trim, np.array([3.0, -2.0, 4.0, 0.1, -0.05, 0.08]), np.array([2.0, 1.0, -1.0, 0.05, 0.02, -0.03]))
        t, V, _ = fully_actuated_run(params, gains, maneuver, x0, 10.0)
        rate = 2 * gains.Gamma.min() / np.linalg.eigvalsh(params.M).max()
        assert np.all(V <= 1.05 * V[0] * np.exp(-rate * t))

    def test_lyapunov_derivative(self, params, trim, maneuver):
        gains = SmcGains(np.full(6, 0.8), SmcGains.default(params).Gamma, chi=0.5, eps=0.05)
        x0 = offset_state(trim, np.array([1.0, 1.0, -1.0, 0.05, 0.05, 0.05]), np.zeros(6))
        dt = 0.005
        t, V, xs = fully_actuated_run(params, gains, maneuver, x0, 4.0, dt)
        for k in range(1, len(t) - 1, 5):
            eta, v = xs[k][6:], xs[k][:6]
            eta_d, eta_d_dot, _ = maneuver(t[k])
            J, _ = euler_transform(eta[3:])
            s, _ = sliding_variable(eta, J @ v, eta_d, eta_d_dot, gains.Lambda)
            V_dot = (V[k + 1] - V[k - 1]) / (2 * dt)
            ns = np.linalg.norm(s)
            bound = -gains.Gamma.min() * ns**2 + gains.chi * ns * (ns < 6 * gains.eps)
            assert V_dot <= bound + 1e-6 * max(1.0, V[k])

    def test_doubling_gamma_halves_decay_time(self, params, trim):
        ref = TrimHold(trim)
        x0 = offset_state(trim, np.array([0.0, 0.0, 0.0, 0.05, 0.03, 0.0]), np.array([1.0, 0.5, 0.5, 0.02, 0.0, 0.01]))
        base = SmcGains.default(params)

        def e2_time(gamma):
            t, V, _ = fully_actuated_run(params, SmcGains(base.Lambda, gamma), ref, x0, 6.0)
            return t[np.argmax(V <= V[0] * np.exp(-2.0))]

        t1, t2 = e2_time(base.Gamma), e2_time(2 * base.Gamma)
        assert t1 > 0 and abs(t2 / t1 - 0.5) <= 0.2 * 0.5

    def test_tracking_error_decays_monotonically(self, params, trim, maneuver):
        x0 = offset_state(trim, np.array([2.0, -1.0, 1.5, 0.05, 0.02, -0.04]), np.zeros(6))
        t, _, xs = fully_actuated_run(params, SmcGains.default(params), maneuver, x0, 15.0)
        err = np.array([np.linalg.norm(tracking_error(x[6:], maneuver(tk)[0])) for tk, x in zip(t, xs)])
        tail = err[t >= 5.0]
        assert np.all(np.diff(tail) <= 1e-12)
        assert tail[-1] < 1e-2 * err[0]


class TestReferenceMomentum:
    def test_linear_ramp(self):
        tau = np.array([1.0, -2.0, 0.5, 0.1, 0.0, -0.3])
        L0 = np.arange(6.0)
        rm = ReferenceMomentum(L0)
        for _ in range(50):
            rm.step(tau, np.zeros(3), 0.02)
        np.testing.assert_allclose(rm.L, L0 + tau * 1.0, atol=1e-12)

    def test_balance(self, rng):
        L = rng.normal(size=6)
        w = rng.normal(size=3)
        tau = skew_star(w) @ L
        np.testing.assert_allclose(reference_momentum(tau, w, L, 0.02, tau, w), L, atol=1e-12)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            reference_momentum(np.zeros(6), np.zeros(3), np.zeros(6), -0.1)

    def test_converges_to_reference_momentum(self, params, trim, maneuver):
        gains = SmcGains.default(params)
        x = offset_state(trim, np.array([2.0, 1.0, -1.0, 0.05, 0.0, 0.05]), np.zeros(6))
        dt = 0.005
        rm = ReferenceMomentum(params.M @ x[:6])
        for k in range(int(15.0 / dt)):
            t = k * dt
            tau = smc_force(params, gains, x[6:], x[:6], maneuver, t)

            def f(x, t, tau=tau):
                return np.concatenate([params.M_inv @ (tau - coriolis(params, x[:6]) @ x[:6]), kinematics(x[9:], x[:6])])

            x = rk4_step(f, x, t, dt)
            rm.step(tau, x[3:6], dt)
        eta_d, eta_d_dot, _ = maneuver(15.0)
        _, J_inv = euler_transform(eta_d[3:])
        L_ref = params.M @ (J_inv @ eta_d_dot)
        assert np.linalg.norm(rm.L - L_ref) < 1e-2 * np.linalg.norm(L_ref)
