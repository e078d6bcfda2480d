import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_discrete_are, solve_discrete_lyapunov

from sdac.errors import ParameterError, RiccatiError
from sdac.lqr import LqrGain, LqrWeights, dare_residual, default_weights, lqr_control, solve_dare


def random_pair(rng, n=6, q=4, radius=1.3):
    A = rng.normal(size=(n, n))
    A *= radius / np.abs(np.linalg.eigvals(A)).max()
    return A, rng.normal(size=(n, q))


class TestWeights:
    def test_vector_input_becomes_diagonal(self):
        w = LqrWeights([1.0, 2.0], [3.0])
        np.testing.assert_array_equal(w.Q, np.diag([1.0, 2.0]))
        np.testing.assert_array_equal(w.R, [[3.0]])

    def test_rejects_indefinite_q(self):
        with pytest.raises(ParameterError):
            LqrWeights([1.0, -1.0], [1.0])

    def test_rejects_singular_r(self):
        with pytest.raises(ParameterError):
            LqrWeights([1.0], [0.0])

    def test_rejects_asymmetric(self):
        with pytest.raises(ParameterError):
            LqrWeights(np.array([[1.0, 0.5], [0.0, 1.0]]), [1.0])

    def test_default_weights_positive(self, params, trim):
        w = default_weights(params, trim)
        assert np.all(np.diag(w.Q) > 0) and np.all(np.diag(w.R) > 0)


class TestSolveDare:
    def test_scalar_golden(self):
        gain = solve_dare(np.array([[1.0]]), np.array([[1.0]]), LqrWeights([1.0], [1.0]))
        phi = (1 + np.sqrt(5)) / 2
        assert gain.P1[0, 0] == pytest.approx(phi, abs=1e-12)
        assert gain.K[0, 0] == pytest.approx(phi - 1, abs=1e-12)
        assert gain.spectral_radius == pytest.approx(2 - phi, abs=1e-12)

    def test_zero_input_reduces_to_lyapunov(self, rng):
        A, _ = random_pair(rng, radius=0.9)
        Q = np.eye(6)
        gain = solve_dare(A, np.zeros((6, 4)), LqrWeights(np.ones(6), np.ones(4)))
        np.testing.assert_allclose(gain.P1, solve_discrete_lyapunov(A.T, Q), rtol=1e-10, atol=1e-10)
        assert not gain.K.any()

    def test_random_pairs_match_scipy(self, rng):
        w = LqrWeights(np.ones(6), np.ones(4))
        for _ in range(100):
            A, B = random_pair(rng)
            gain = solve_dare(A, B, w)
            P = solve_discrete_are(A, B, w.Q, w.R)
            assert dare_residual(A, B, w.Q, w.R, gain.P1) < 1e-10 * max(1.0, np.linalg.norm(gain.P1))
            assert gain.spectral_radius < 1.0
            np.testing.assert_allclose(gain.P1, P, rtol=1e-8, atol=1e-8)

    def test_not_stabilizable_raises(self):
        A = np.diag([2.0, 0.5])
        B = np.array([[0.0], [1.0]])
        with pytest.raises(RiccatiError):
            solve_dare(A, B, LqrWeights(np.ones(2), np.ones(1)))

    def test_uncontrollable_stable_mode_is_fine(self):
        A = np.diag([0.5, 2.0])
        B = np.array([[0.0], [1.0]])
        gain = solve_dare(A, B, LqrWeights(np.ones(2), np.ones(1)))
        assert gain.spectral_radius == pytest.approx(0.5, abs=1e-9)

    def test_solution_symmetric_positive_definite(self, rng):
        A, B = random_pair(rng)
        P = solve_dare(A, B, LqrWeights(np.ones(6), np.ones(4))).P1
        np.testing.assert_array_equal(P, P.T)
        assert np.linalg.eigvalsh(P).min() > 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 1.6))
def test_closed_loop_contracts_in_riccati_norm(seed, radius):
    rng = np.random.default_rng(seed)
    A, B = random_pair(rng, radius=radius)
    w = LqrWeights(np.ones(6), np.ones(4))
    gain = solve_dare(A, B, w)
    Acl = A - B @ gain.K
    # P - Acl' P Acl = Q + K' R K > 0
    decrease = gain.P1 - Acl.T @ gain.P1 @ Acl
    np.testing.assert_allclose(decrease, w.Q + gain.K.T @ w.R @ gain.K, atol=1e-8 * max(1.0, np.linalg.norm(gain.P1)))
    assert np.linalg.eigvalsh(0.5 * (decrease + decrease.T)).min() > 0


class TestLqrControl:
    gain = LqrGain(K=np.arange(24.0).reshape(4, 6) / 100, P1=np.eye(6), spectral_radius=0.5)
    bounds = (-np.ones(4), np.ones(4))

    def test_zero_error_returns_base(self):
        base = np.array([0.1, -0.2, 0.3, 0.0])
        L = np.arange(6.0)
        delta, sat = lqr_control(self.gain, L, L, base, self.bounds)
        np.testing.assert_array_equal(delta, base)
        assert not sat.any()

    def test_saturation(self):
        delta, sat = lqr_control(self.gain, np.full(6, 100.0), np.zeros(6), np.zeros(4), self.bounds)
        np.testing.assert_array_equal(delta, -np.ones(4))
        assert sat.all()

    def test_linear_inside_box(self, rng):
        e1, e2 = rng.normal(scale=0.1, size=(2, 6))
        d1, _ = lqr_control(self.gain, e1, np.zeros(6), np.zeros(4), self.bounds)
        d2, _ = lqr_control(self.gain, e2, np.zeros(6), np.zeros(4), self.bounds)
        d12, _ = lqr_control(self.gain, e1 + e2, np.zeros(6), np.zeros(4), self.bounds)
        np.testing.assert_allclose(d12, d1 + d2, atol=1e-15)
