import numpy as np
import pytest
import scipy.linalg

from ddsc.errors import DefinitenessError, StabilityError
from ddsc.matops import (
    inv_sqrt_spd,
    is_definite,
    is_hurwitz,
    logdet_spd,
    solve_lyapunov,
    spectral_norm,
    sym_eig,
    symmetrize,
)


def _random_spd(rng, n):
    m = rng.standard_normal((n, n))
    return m @ m.T + n * np.eye(n)


def test_symmetrize_accepts_roundoff():
    m = np.array([[1.0, 2.0], [2.0 + 1e-12, 3.0]])
    s = symmetrize(m)
    assert np.array_equal(s, s.T)


def test_symmetrize_rejects_genuine_asymmetry():
    with pytest.raises(ValueError, match="not symmetric"):
        symmetrize(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_sym_eig_matches_numpy():
    rng = np.random.default_rng(3)
    m = _random_spd(rng, 6) - 4.0 * np.eye(6)
    w, v = sym_eig(m)
    np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(m), rtol=0, atol=1e-10)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, m, atol=1e-9)


def test_is_definite_senses():
    assert is_definite(np.eye(3), "positive")
    assert not is_definite(np.diag([1.0, -1e-3, 1.0]), "positive")
    assert is_definite(-np.eye(2), "negative")
    with pytest.raises(ValueError):
        is_definite(np.eye(2), "sideways")


def test_is_definite_threshold_is_relative():
    # the verdict must not change when the matrix is rescaled
    m = np.diag([1.0, 1e-4])
    for scale in (1e-6, 1.0, 1e6):
        assert is_definite(scale * m, "positive")
    # a relatively tiny negative eigenvalue is roundoff under "psd",
    # indefiniteness under strict "positive"
    r = np.diag([1e9, -0.5])
    assert is_definite(r, "psd")
    assert not is_definite(r, "positive")
    assert np.all([is_definite(np.zeros((2, 2)), s) for s in ("psd", "nsd")])
    assert not is_definite(np.zeros((2, 2)), "positive")


def test_inv_sqrt_spd_inverts_and_stays_symmetric():
    rng = np.random.default_rng(11)
    m = _random_spd(rng, 5)
    r = inv_sqrt_spd(m)
    np.testing.assert_allclose(r, r.T, atol=1e-12)
    np.testing.assert_allclose(r @ m @ r, np.eye(5), atol=1e-9)
    assert is_definite(r, "positive")


def test_inv_sqrt_rejects_indefinite():
    with pytest.raises(DefinitenessError):
        inv_sqrt_spd(np.diag([1.0, -1.0]))


def test_logdet_identity_is_zero():
    assert logdet_spd(np.eye(4)) == pytest.approx(0.0, abs=1e-14)


def test_logdet_known_diagonal():
    m = np.diag([np.e, np.e**2])
    assert logdet_spd(m) == pytest.approx(3.0, rel=1e-12)


def test_logdet_matches_eigenvalue_sum():
    rng = np.random.default_rng(7)
    for _ in range(5):
        m = _random_spd(rng, 7)
        w, _ = sym_eig(m)
        assert logdet_spd(m) == pytest.approx(np.sum(np.log(w)), rel=1e-10)


def test_logdet_rejects_indefinite():
    with pytest.raises(DefinitenessError):
        logdet_spd(np.diag([2.0, 0.0]))


def test_spectral_norm_values():
    assert spectral_norm(np.eye(5)) == pytest.approx(1.0, rel=1e-12)
    assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0, rel=1e-12)


def test_spectral_norm_matches_gram_eigenvalue():
    rng = np.random.default_rng(19)
    m = rng.standard_normal((4, 6))
    w, _ = sym_eig(m.T @ m)
    assert spectral_norm(m) == pytest.approx(np.sqrt(w.max()), rel=1e-10)


def test_spectral_norm_submultiplicative():
    rng = np.random.default_rng(23)
    for _ in range(10):
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((4, 6))
        assert spectral_norm(a @ b) <= spectral_norm(a) * spectral_norm(b) + 1e-9


def test_hurwitz_basic():
    assert is_hurwitz(-np.eye(3))
    assert not is_hurwitz(np.array([[0.0, 1.0], [-1.0, 0.0]]))  # spectrum on the axis


def test_hurwitz_margin_consistency():
    a = np.diag([-0.5, -2.0])
    assert is_hurwitz(a, margin=0.4)
    assert not is_hurwitz(a, margin=0.6)
    # margin > 0 acceptance implies plain acceptance
    assert is_hurwitz(a)


def test_lyapunov_scalar():
    # -2p + 4 = 0
    p = solve_lyapunov(np.array([[-1.0]]), np.array([[4.0]]))
    assert p[0, 0] == pytest.approx(2.0, rel=1e-12)


def test_lyapunov_diagonal():
    p = solve_lyapunov(-np.eye(2), 2.0 * np.eye(2))
    np.testing.assert_allclose(p, np.eye(2), atol=1e-12)


def test_lyapunov_matches_independent_solver():
    """Random stable plants against the Bartels-Stewart solver in scipy."""
    rng = np.random.default_rng(31)
    for _ in range(5):
        a = rng.standard_normal((4, 4)) - 4.0 * np.eye(4)
        q = _random_spd(rng, 4)
        p = solve_lyapunov(a, q)
        ref = scipy.linalg.solve_continuous_lyapunov(a.T, -q)
        np.testing.assert_allclose(p, ref, rtol=1e-9, atol=1e-9)
        assert np.abs(a.T @ p + p @ a + q).max() < 1e-9 * np.abs(q).max()


def test_lyapunov_output_psd_for_psd_q():
    rng = np.random.default_rng(37)
    a = rng.standard_normal((5, 5)) - 5.0 * np.eye(5)
    c = rng.standard_normal((2, 5))
    p = solve_lyapunov(a, c.T @ c)
    w, _ = sym_eig(symmetrize(p, tol=1e-7))
    assert w.min() >= -1e-10


def test_lyapunov_requires_hurwitz():
    with pytest.raises(StabilityError):
        solve_lyapunov(np.array([[1.0]]), np.array([[1.0]]))
