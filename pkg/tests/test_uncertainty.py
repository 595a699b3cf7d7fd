"""Sample constraint blocks and the minimum-volume ellipsoid fit."""

import dataclasses

import numpy as np
import pytest

from ddsc.errors import DegenerateDataError, EllipsoidUnboundedError
from ddsc.lti import CollectConfig, DataSet, simulate_collect
from ddsc.uncertainty import (
    contains,
    ellipsoid_from_fit,
    fit_min_ellipsoid,
    point_ellipsoid,
    sample_blocks,
    sample_members,
)


def membership_eig(ell, A, B):
    """Largest eigenvalue of the membership form; <= 1 means inside."""
    Z = np.vstack([np.atleast_2d(A).T, np.atleast_2d(B).T])
    dev = Z - ell.center
    return float(np.linalg.eigvalsh(dev.T @ ell.metric @ dev)[-1])


def prefix(data, count):
    """The first `count` samples as a dataset of their own."""
    return DataSet(
        X0=data.X0[:, :count],
        U0=data.U0[:, :count],
        X1=data.X1[:, :count],
        Ts=data.Ts,
        eps=data.eps,
        seed=data.seed,
        D0=None if data.D0 is None else data.D0[:, :count],
    )


@pytest.fixture(scope="module")
def data40(bench):
    return simulate_collect(bench.sys, CollectConfig(T=40))


@pytest.fixture(scope="module")
def fit40(bench, data40):
    return fit_min_ellipsoid(data40, bench.sys.G)


# ---------------------------------------------------------------- blocks


def test_zero_data_blocks_reduce_to_the_noise_term():
    data = DataSet(
        X0=np.zeros((2, 3)),
        U0=np.zeros((1, 3)),
        X1=np.zeros((2, 3)),
        Ts=0.1,
        eps=1.0,
        seed=0,
    )
    blocks = sample_blocks(data, np.eye(2))
    assert len(blocks) == 3
    for blk in blocks:
        assert np.array_equal(blk.outer_deriv, -np.eye(2))
        assert not blk.cross.any()
        assert not blk.outer_regressor.any()


def test_blocks_carry_rank_one_regressor_outers(bench, data40):
    blocks = sample_blocks(data40, bench.sys.G)
    assert len(blocks) == data40.n_samples
    Z0 = data40.regressors()
    for i, blk in enumerate(blocks):
        z = Z0[:, i : i + 1]
        assert np.linalg.matrix_rank(blk.outer_regressor) <= 1
        assert blk.outer_regressor == pytest.approx(z @ z.T)
        stacked = np.block(
            [[blk.outer_deriv, blk.cross.T], [blk.cross, blk.outer_regressor]]
        )
        assert np.array_equal(blk.full_matrix(), stacked)


def test_true_plant_satisfies_every_sample_inequality(bench, data40):
    """The generating plant must pass each per-sample quadratic test."""
    truth = np.vstack([bench.sys.A.T, bench.sys.B.T])
    stack = np.vstack([np.eye(4), truth])
    for blk in sample_blocks(data40, bench.sys.G):
        M = blk.full_matrix()
        top = np.linalg.eigvalsh(stack.T @ M @ stack)[-1]
        assert top <= 1e-10 * max(1.0, np.linalg.norm(M))


def test_noise_gain_must_match_the_state_dimension(data40):
    with pytest.raises(ValueError, match="noise gain has 3 rows, expected 4"):
        sample_blocks(data40, np.eye(3))


# ------------------------------------------------------------------- fit


def test_fit_contains_the_generating_plant(bench, fit_cache):
    _, ell = fit_cache()
    assert contains(ell, bench.sys.A, bench.sys.B, tol=1e-7)


def test_fit_reports_multipliers_and_gap(data40, fit40):
    assert fit40.multipliers is not None
    assert fit40.multipliers.shape == (data40.n_samples,)
    assert fit40.multipliers.min() >= -1e-9
    # frozen regression anchor; the fit is deterministic
    assert fit40.log_volume_stat == pytest.approx(48.61977185900522, rel=1e-6)
    assert fit40.fit_gap <= 1e-6 * (1 + abs(fit40.log_volume_stat))


def test_doubling_declared_noise_cannot_shrink_the_set(bench, data40, fit40):
    wider = fit_min_ellipsoid(dataclasses.replace(data40, eps=0.02), bench.sys.G)
    # a larger set shows up as a smaller logdet of the metric
    assert fit40.log_volume_stat - wider.log_volume_stat >= -1e-5
    assert contains(wider, bench.sys.A, bench.sys.B, tol=1e-7)


def test_vanishing_noise_pins_down_the_plant(bench):
    data = simulate_collect(bench.sys, CollectConfig(T=100, eps=1e-4))
    ell = fit_min_ellipsoid(data, bench.sys.G)
    target = np.hstack([bench.sys.A, bench.sys.B])
    assert np.linalg.norm(ell.center.T - target) <= 1e-2


def test_volume_never_grows_with_more_samples(bench, data40, fit40):
    logdets = [
        fit_min_ellipsoid(prefix(data40, count), bench.sys.G).log_volume_stat
        for count in (12, 25)
    ]
    logdets.append(fit40.log_volume_stat)
    for smaller, larger in zip(logdets, logdets[1:]):
        assert larger >= smaller - 1e-5


def test_center_reconstructs_from_the_raw_fit_variables(fit40):
    rebuilt = ellipsoid_from_fit(fit40.metric, fit40.offset)
    assert np.linalg.norm(rebuilt.center - fit40.center) <= 1e-9
    assert rebuilt.metric == pytest.approx(fit40.metric)


# ---------------------------------------------------------- membership


def test_center_passes_the_membership_test(fit_cache):
    _, ell = fit_cache()
    A, B = ell.split_center()
    assert contains(ell, A, B)
    assert membership_eig(ell, A, B) <= 1e-12


def test_membership_rejects_an_inflated_boundary_point(fit_cache):
    _, ell = fit_cache()
    gamma = np.zeros((6, 4))
    gamma[0, 0] = 2.0
    Z = ell.center + ell.metric_inv_sqrt @ gamma
    A, B = Z[:4].T, Z[4:].T
    assert not contains(ell, A, B, tol=0.0)
    assert membership_eig(ell, A, B) == pytest.approx(4.0, rel=1e-9)


def test_point_ellipsoid_is_a_tight_ball(bench):
    ell = point_ellipsoid(bench.sys.A, bench.sys.B)
    assert contains(ell, bench.sys.A, bench.sys.B)
    assert not contains(ell, bench.sys.A + 1e-3, bench.sys.B, tol=0.0)


# ------------------------------------------------------------- members


def test_center_and_boundary_lead_the_member_stream(fit_cache):
    _, ell = fit_cache()
    members = sample_members(ell, 5, seed=3)
    a0, b0 = members[0]
    want_a, want_b = ell.split_center()
    assert np.array_equal(a0, want_a)
    assert np.array_equal(b0, want_b)
    a1, b1 = members[1]
    assert abs(membership_eig(ell, a1, b1) - 1.0) <= 1e-8


def test_every_sampled_member_is_contained(fit_cache):
    _, ell = fit_cache()
    for A, B in sample_members(ell, 30, seed=11):
        assert contains(ell, A, B, tol=1e-9)


def test_member_stream_is_deterministic_per_seed(fit_cache):
    _, ell = fit_cache()
    first = sample_members(ell, 6, seed=4)
    second = sample_members(ell, 6, seed=4)
    other = sample_members(ell, 6, seed=5)
    for (a1, b1), (a2, b2) in zip(first, second):
        assert np.array_equal(a1, a2)
        assert np.array_equal(b1, b2)
    assert any(
        not np.array_equal(a1, a3) for (a1, _), (a3, _) in zip(first, other)
    )


# -------------------------------------------------------------- errors


def test_zero_noise_bound_is_rejected(bench, data40):
    flat = dataclasses.replace(data40, eps=0.0, D0=None)
    with pytest.raises(DegenerateDataError, match="must be positive"):
        fit_min_ellipsoid(flat, bench.sys.G)


def test_thin_excitation_is_reported_as_degenerate(bench):
    data = simulate_collect(bench.sys, CollectConfig(T=3))
    with pytest.raises(DegenerateDataError, match="rank 3 of 6"):
        fit_min_ellipsoid(data, bench.sys.G)


def test_all_zero_samples_are_degenerate():
    data = DataSet(
        X0=np.zeros((2, 3)),
        U0=np.zeros((1, 3)),
        X1=np.zeros((2, 3)),
        Ts=0.1,
        eps=1.0,
        seed=0,
    )
    with pytest.raises(DegenerateDataError, match="rank 0 of 3"):
        fit_min_ellipsoid(data, np.eye(2))


def test_understated_noise_leaves_the_volume_unbounded(bench, data40):
    lying = dataclasses.replace(data40, eps=1e-8, D0=None)
    with pytest.raises(EllipsoidUnboundedError):
        fit_min_ellipsoid(lying, bench.sys.G)
