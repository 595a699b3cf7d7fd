import numpy as np
import pytest

from ddsc.errors import DivergenceError, StabilityError
from ddsc.lti import (
    CollectConfig,
    DataSet,
    LtiSystem,
    SparsityPattern,
    closed_loop,
    make_mass_spring,
    simulate_collect,
    transfer_matrix,
)
from ddsc.matops import is_hurwitz

# stabilizing structured gain for the two-mass benchmark (support in
# columns 2-3 only), used as a known-good closed loop in several tests
BENCH_GAIN = np.array([[0.0, 0.9078, -2.0189, 0.0], [0.0, 0.3254, 0.3022, 0.0]])


def scalar_sys(a=-1.0, b=0.0, g=1.0, c=1.0, d=0.0, h=0.0):
    one = lambda v: np.array([[float(v)]])
    return LtiSystem(A=one(a), B=one(b), G=one(g), C=one(c), D=one(d), H=one(h))


class TestMassSpring:
    def test_two_mass_matrices(self):
        sys = make_mass_spring(2)
        np.testing.assert_array_equal(sys.A[2], [-2.0, 1.0, 0.0, 0.0])
        np.testing.assert_array_equal(sys.A[3], [1.0, -2.0, 0.0, 0.0])
        np.testing.assert_array_equal(sys.A[:2, 2:], np.eye(2))
        np.testing.assert_array_equal(
            sys.B, [[0, 0], [0, 0], [1, 0], [0, 1]]
        )
        np.testing.assert_array_equal(sys.G, sys.B)

    def test_single_mass(self):
        sys = make_mass_spring(1)
        np.testing.assert_array_equal(sys.A, [[0.0, 1.0], [-2.0, 0.0]])

    def test_open_loop_marginal(self):
        # spring chain without damping: spectrum on the imaginary axis
        assert not is_hurwitz(make_mass_spring(2).A)

    def test_dimensions(self):
        sys = make_mass_spring(3)
        assert sys.n_states == 6
        assert sys.n_inputs == sys.n_dist == 3
        assert sys.n_outputs == 6


def test_closed_loop_zero_gain():
    sys = make_mass_spring(2)
    a_cl, c_cl = closed_loop(sys, np.zeros((2, 4)))
    np.testing.assert_array_equal(a_cl, sys.A)
    np.testing.assert_array_equal(c_cl, sys.C)


def test_closed_loop_scalar():
    sys = scalar_sys(a=1.0, b=1.0)
    a_cl, _ = closed_loop(sys, np.array([[-2.0]]))
    assert a_cl[0, 0] == -1.0


def test_closed_loop_bench_gain_is_stabilizing():
    sys = make_mass_spring(2)
    a_cl, _ = closed_loop(sys, BENCH_GAIN)
    assert is_hurwitz(a_cl)


def test_lti_system_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        LtiSystem(
            A=np.eye(2),
            B=np.ones((3, 1)),
            G=np.ones((2, 1)),
            C=np.eye(2),
            D=np.zeros((2, 1)),
            H=np.zeros((2, 1)),
        )


class TestTransferMatrix:
    def test_dc_gain_scalar(self):
        sys = scalar_sys()
        a_cl, c_cl = closed_loop(sys, np.zeros((1, 1)))
        t = transfer_matrix(a_cl, sys.G, c_cl, sys.H, 0.0)
        assert t[0, 0] == pytest.approx(1.0)

    def test_strictly_proper_rolloff(self):
        sys = scalar_sys()
        a_cl, c_cl = closed_loop(sys, np.zeros((1, 1)))
        t = transfer_matrix(a_cl, sys.G, c_cl, sys.H, 1e6)
        assert abs(t[0, 0]) < 1e-5

    def test_feedthrough_shifts_dc(self):
        # (jw + 2)/(jw + 1) at w = 0
        sys = scalar_sys(h=1.0)
        t = transfer_matrix(sys.A, sys.G, sys.C, sys.H, 0.0)
        assert t[0, 0] == pytest.approx(2.0)

    def test_conjugate_symmetry(self):
        sys = make_mass_spring(2)
        a_cl, c_cl = closed_loop(sys, BENCH_GAIN)
        for w in (0.1, 1.0, 7.3):
            fwd = transfer_matrix(a_cl, sys.G, c_cl, np.zeros((4, 2)), w)
            bwd = transfer_matrix(a_cl, sys.G, c_cl, np.zeros((4, 2)), -w)
            np.testing.assert_allclose(np.abs(fwd), np.abs(bwd), atol=1e-12)

    def test_pole_on_axis(self):
        # resolvent of the marginal open loop is singular at its resonance
        sys = make_mass_spring(1)
        with pytest.raises(StabilityError):
            transfer_matrix(sys.A, sys.G, sys.C, np.zeros((2, 1)), np.sqrt(2.0))


class TestSimulateCollect:
    def test_quiet_experiment_is_all_zero(self):
        sys = make_mass_spring(2)
        cfg = CollectConfig(T=5, eps=0.0, amplitude=0.0, x0_scale=0.0)
        data = simulate_collect(sys, cfg)
        for block in (data.X0, data.U0, data.X1, data.D0):
            assert np.all(block == 0.0)

    def test_derivative_identity(self):
        """X1 must equal A X0 + B U0 + G D0 exactly; it is evaluated, not
        differenced."""
        sys = make_mass_spring(2)
        data = simulate_collect(sys, CollectConfig(T=40))
        rhs = sys.A @ data.X0 + sys.B @ data.U0 + sys.G @ data.D0
        np.testing.assert_array_equal(data.X1, rhs)

    def test_disturbance_bound_exact(self):
        data = simulate_collect(make_mass_spring(2), CollectConfig(T=60, eps=0.03))
        norms = np.linalg.norm(data.D0, axis=0)
        assert norms.max() <= 0.03

    def test_seed_determinism(self):
        sys = make_mass_spring(2)
        a = simulate_collect(sys, CollectConfig(T=25, seed=9))
        b = simulate_collect(sys, CollectConfig(T=25, seed=9))
        for x, y in ((a.X0, b.X0), (a.U0, b.U0), (a.X1, b.X1), (a.D0, b.D0)):
            np.testing.assert_array_equal(x, y)

    def test_distinct_seeds_differ(self):
        sys = make_mass_spring(2)
        a = simulate_collect(sys, CollectConfig(T=25, seed=1))
        b = simulate_collect(sys, CollectConfig(T=25, seed=2))
        assert np.abs(a.X0 - b.X0).max() > 1e-6

    def test_regressor_rank(self):
        # persistently exciting input: [X0; U0] full row rank once T >= n + nu
        sys = make_mass_spring(2)
        for seed in range(1, 6):
            data = simulate_collect(sys, CollectConfig(T=6, seed=seed))
            z = np.vstack([data.X0, data.U0])
            assert np.linalg.matrix_rank(z) == 6

    def test_divergence_guard(self):
        unstable = LtiSystem(
            A=np.array([[25.0]]),
            B=np.array([[0.0]]),
            G=np.array([[1.0]]),
            C=np.array([[1.0]]),
            D=np.array([[0.0]]),
            H=np.array([[0.0]]),
        )
        with pytest.raises(DivergenceError, match="horizon"):
            simulate_collect(unstable, CollectConfig(T=30, Ts=1.0))


class TestSparsityPattern:
    def test_project_masks_complement(self):
        pat = SparsityPattern(np.array([[0, 1, 1, 0], [0, 1, 1, 0]]))
        k = np.arange(8.0).reshape(2, 4)
        proj = pat.project(k)
        np.testing.assert_array_equal(proj[:, [0, 3]], 0.0)
        np.testing.assert_array_equal(proj[:, 1:3], k[:, 1:3])

    def test_residual_is_offpattern_norm(self):
        pat = SparsityPattern(np.array([[1, 0], [0, 1]]))
        k = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert pat.residual(k) == pytest.approx(np.sqrt(4.0 + 9.0))
        assert pat.residual(pat.project(k)) == 0.0

    def test_complement_partition(self):
        pat = SparsityPattern(np.array([[0, 1], [1, 0]]))
        np.testing.assert_array_equal(pat.free + pat.forced_zero, np.ones((2, 2)))

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            SparsityPattern(np.array([[0.5, 1.0]]))


def test_dataset_validates_column_counts():
    with pytest.raises(ValueError):
        DataSet(
            X0=np.zeros((2, 5)),
            U0=np.zeros((1, 4)),
            X1=np.zeros((2, 5)),
            Ts=0.1,
            eps=0.01,
            seed=1,
        )
