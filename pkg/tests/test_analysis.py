import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdac.analysis import (
    composite_lyapunov,
    controllability,
    controllability_matrix,
    lyapunov_monotonicity,
    maneuverable,
    numerical_rank,
    stabilizability,
)
from sdac.errors import IdentificationError
from sdac.identification import LinearMomentumModel


def model(A, B, valid=True, Ts=0.02):
    n, q = B.shape
    return LinearMomentumModel(A=A, B=B, Ts=Ts, rank=n + q, residual=0.0, valid=valid, inputs_excited=(True,) * q, window_id=0)


class TestControllability:
    def test_matrix_layout(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0], [1.0]])
        np.testing.assert_array_equal(controllability_matrix(A, B), [[0.0, 1.0], [1.0, 0.0]])

    def test_zero_dynamics_rank_is_input_count(self, rng):
        rank, ok = controllability(np.zeros((6, 6)), rng.normal(size=(6, 4)))
        assert rank == 4 and not ok

    def test_jordan_chain_single_input(self):
        A = np.diag(np.ones(5), 1)
        B = np.zeros((6, 1))
        B[-1] = 1.0
        assert controllability(A, B) == (6, True)

    def test_rank_of_zero(self):
        assert numerical_rank(np.zeros((3, 3))) == 0


class TestStabilizability:
    def test_uncontrollable_unstable_mode(self):
        assert not stabilizability(np.diag([2.0, 0.5]), np.array([[0.0], [1.0]]))

    def test_uncontrollable_stable_mode(self):
        assert stabilizability(np.diag([0.5, 2.0]), np.array([[0.0], [1.0]]))
        assert stabilizability(np.diag([2.0, 0.5]), np.array([[1.0], [0.0]]))

    def test_continuous_time(self):
        A = np.diag([-1.0, 0.5])
        assert stabilizability(A, np.array([[0.0], [1.0]]), discrete=False)
        assert not stabilizability(A, np.array([[1.0], [0.0]]), discrete=False)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 3))
    def test_controllable_implies_stabilizable(self, seed, q):
        rng = np.random.default_rng(seed)
        A = 1.5 * rng.normal(size=(4, 4))
        B = rng.normal(size=(4, q))
        if controllability(A, B)[1]:
            assert stabilizability(A, B)


class TestManeuverability:
    A = 0.98 * np.eye(6)
    B = np.vstack([np.eye(4), np.zeros((2, 4))])
    bounds = (-np.ones(4), np.ones(4))

    def test_zero_demand(self):
        res = maneuverable(model(self.A, self.B), [(np.zeros(6), np.zeros(6))] * 3, self.bounds)
        assert res.ok and res.margin == pytest.approx(1.0)

    def test_huge_jump_not_attainable(self):
        res = maneuverable(model(self.A, self.B), [(np.zeros(6), np.array([1e4, 0, 0, 0, 0, 0]))], self.bounds)
        assert not res.ok

    def test_unreachable_direction_is_not_a_box_violation(self):
        # demand along an unactuated row is a rank shortfall, not a box shortfall
        res = maneuverable(model(self.A, self.B), [(np.zeros(6), np.array([0, 0, 0, 0, 1.0, 0]))], self.bounds)
        assert res.ok

    def test_invalid_model_raises(self):
        with pytest.raises(IdentificationError):
            maneuverable(model(self.A, self.B, valid=False), [], self.bounds)

    def test_base_outside_box_raises(self):
        with pytest.raises(ValueError):
            maneuverable(model(self.A, self.B), [], self.bounds, delta_base=np.full(4, 2.0))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.1, 5.0), st.floats(1.0, 3.0), st.integers(0, 2**32 - 1))
    def test_monotone_in_bounds(self, half, grow, seed):
        rng = np.random.default_rng(seed)
        traj = [(rng.normal(size=6), rng.normal(scale=200, size=6)) for _ in range(4)]
        m = model(self.A, self.B)
        small = maneuverable(m, traj, (-np.full(4, half), np.full(4, half)))
        large = maneuverable(m, traj, (-np.full(4, half * grow), np.full(4, half * grow)))
        assert large.ok or not small.ok
        assert np.all(large.residuals <= small.residuals + 1e-9)


class TestLyapunov:
    def test_composite_adds_quadratic(self):
        assert composite_lyapunov(1.0, np.array([1.0, 2.0]), 2 * np.eye(2)) == pytest.approx(6.0)

    def test_decreasing_passes(self):
        t = np.arange(0, 2.0001, 0.005)
        chk = lyapunov_monotonicity(t, np.exp(-t), [], 0.005, 0.02)
        assert chk.ok and chk.n_steps == 100 and chk.n_violations == 0

    def test_jump_across_event_ignored(self):
        t = np.arange(0, 2.0001, 0.02)
        V = np.exp(-t) + (t >= 1.0)
        assert lyapunov_monotonicity(t, V, [1.0], 0.005, 0.02).ok
        assert not lyapunov_monotonicity(t, V, [], 0.005, 0.02).ok

    def test_nan_samples_skipped(self):
        t = np.arange(0, 1.0001, 0.02)
        V = np.exp(-t)
        V[:10] = np.nan
        chk = lyapunov_monotonicity(t, V, [], 0.005, 0.02)
        assert chk.ok and chk.n_steps == len(t) - 11

    def test_small_rise_within_tolerance(self):
        t = np.arange(0, 1.0001, 0.02)
        V = 1.0 - t
        V[20] += 0.2 * 0.02 * 0.25
        assert lyapunov_monotonicity(t, V, [], 0.005, 0.02).ok

    def test_empty(self):
        assert lyapunov_monotonicity([], [], [], 0.005, 0.02).ok
