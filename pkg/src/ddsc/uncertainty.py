"""Set-membership uncertainty from sampled trajectories.

Each sample (x_i, u_i, xdot_i) with disturbance energy bound ||d_i|| <= eps
confines the stacked plant matrix Z = [A B]' to a quadratic matrix inequality.
Intersecting the samples and maximizing the log-volume objective yields the
smallest matrix ellipsoid certified to contain the true plant, which the
synthesis stage consumes directly. A known plant enters the same pipeline as
a degenerate point ellipsoid, so model-based and data-driven designs share
every downstream code path.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DefinitenessError, DegenerateDataError, EllipsoidUnboundedError
from .lti import DataSet
from .matops import inv_sqrt_spd, is_definite, sym_eig, symmetrize
from .lmi import LmiProblem, bmat, maximize_logdet

__all__ = [
    "SampleBlock",
    "MatrixEllipsoid",
    "sample_blocks",
    "fit_min_ellipsoid",
    "point_ellipsoid",
    "contains",
    "sample_members",
]


@dataclass(frozen=True)
class SampleBlock:
    """Quadratic constraint pieces contributed by one sample.

    full_matrix() assembles [[outer_deriv, cross.T], [cross, outer_regressor]];
    nonnegative combinations of these blocks tighten the feasible plant set.
    """

    outer_deriv: np.ndarray  # xdot xdot' - eps^2 G G'
    cross: np.ndarray  # -z xdot'
    outer_regressor: np.ndarray  # z z'

    def full_matrix(self):
        return np.block(
            [[self.outer_deriv, self.cross.T], [self.cross, self.outer_regressor]]
        )


def sample_blocks(data: DataSet, noise_gain):
    """Per-sample constraint blocks for the given disturbance input matrix."""
    G = np.atleast_2d(np.asarray(noise_gain, dtype=float))
    n_x = data.X0.shape[0]
    if G.shape[0] != n_x:
        raise ValueError(f"noise gain has {G.shape[0]} rows, expected {n_x}")
    noise_outer = data.eps**2 * (G @ G.T)
    Z0 = data.regressors()
    blocks = []
    for i in range(data.n_samples):
        xdot = data.X1[:, i : i + 1]
        z = Z0[:, i : i + 1]
        blocks.append(
            SampleBlock(
                outer_deriv=xdot @ xdot.T - noise_outer,
                cross=-z @ xdot.T,
                outer_regressor=z @ z.T,
            )
        )
    return blocks


@dataclass(frozen=True)
class MatrixEllipsoid:
    """Matrix ball {Z : (Z - center)' metric (Z - center) <= I} for Z = [A B]'."""

    metric: np.ndarray  # spd, n_z x n_z
    center: np.ndarray  # n_z x n_x
    metric_inv_sqrt: np.ndarray
    multipliers: np.ndarray | None = None  # fitted sample weights, if any
    log_volume_stat: float | None = None  # logdet(metric) at the fit
    fit_gap: float | None = None  # stationarity gap left by the fit, if fitted

    def __post_init__(self):
        if not is_definite(self.metric, "positive"):
            raise DegenerateDataError("ellipsoid metric must be positive definite")

    @property
    def n_plant_rows(self):
        return self.center.shape[0]

    @property
    def n_states(self):
        return self.center.shape[1]

    @property
    def n_inputs(self):
        return self.center.shape[0] - self.center.shape[1]

    @property
    def offset(self):
        """The linear fit coefficient -metric @ center (used for round trips)."""
        return -self.metric @ self.center

    def split_center(self):
        """Nominal (A, B) read off the ellipsoid center."""
        n_x = self.n_states
        Zt = self.center.T
        return Zt[:, :n_x], Zt[:, n_x:]


def ellipsoid_from_fit(metric, offset, multipliers=None, log_volume=None, fit_gap=None):
    """Build the ellipsoid from the raw fit variables (metric, offset)."""
    metric = symmetrize(np.asarray(metric, dtype=float))
    center = -np.linalg.solve(metric, np.asarray(offset, dtype=float))
    return MatrixEllipsoid(
        metric=metric,
        center=center,
        metric_inv_sqrt=inv_sqrt_spd(metric),
        multipliers=None if multipliers is None else np.asarray(multipliers, float),
        log_volume_stat=log_volume,
        fit_gap=fit_gap,
    )


def point_ellipsoid(A, B, rho=1e8):
    """Degenerate ellipsoid of radius 1/sqrt(rho) centered at a known plant."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    center = np.vstack([A.T, B.T])
    n_z = center.shape[0]
    metric = rho * np.eye(n_z)
    return MatrixEllipsoid(
        metric=metric,
        center=center,
        metric_inv_sqrt=np.eye(n_z) / np.sqrt(rho),
    )


def _fit_problem(data: DataSet, noise_gain, eta=1e-9, sigma_cap=None):
    """Log-volume fit as an LMI problem; the logdet target is "metric"."""
    blocks = sample_blocks(data, noise_gain)
    n_x = data.X0.shape[0]
    n_z = n_x + data.U0.shape[0]
    T = len(blocks)
    if sigma_cap is None:
        # the metric scales like regressor energy / eps^2; cap well above that
        energy = max(1.0, sum(np.trace(b.outer_regressor) for b in blocks) / n_z)
        sigma_cap = 1e4 * energy / data.eps**2

    prob = LmiProblem(eta=eta)
    metric = prob.sym("metric", n_z)
    offset = prob.mat("offset", n_z, n_x)
    mult = prob.mat("mult", T, 1)
    prob.require_nonneg(mult, name="multipliers")
    prob.require_psd(metric, strict=True, name="metric-spd")

    # sum_i theta_i [[c_i, b_i'], [b_i, a_i]] as one coefficient tensor
    dim_tl = n_x + n_z
    theta_tensor = np.zeros((T, dim_tl, dim_tl))
    for i, blk in enumerate(blocks):
        theta_tensor[i] = blk.full_matrix()
    theta_sum = prob.expr_from_terms((dim_tl, dim_tl), {"mult": theta_tensor})

    skeleton = bmat(
        [
            [-np.eye(n_x), offset.T, offset.T],
            [offset, metric, np.zeros((n_z, n_z))],
            [offset, np.zeros((n_z, n_z)), -metric],
        ]
    )
    pad = bmat(
        [
            [theta_sum, np.zeros((dim_tl, n_z))],
            [np.zeros((n_z, dim_tl)), np.zeros((n_z, n_z))],
        ]
    )
    prob.require_nsd(skeleton - pad, name="containment")
    return prob, sigma_cap


def fit_min_ellipsoid(data: DataSet, noise_gain, eta=1e-9, gap_tol=1e-6,
                      max_outer=1000, sigma_cap=None):
    """Minimum-volume ellipsoid certified to contain every plant consistent
    with the samples.

    Raises DegenerateDataError when the data admits no bounded fit interior
    and EllipsoidUnboundedError when the volume is not pinned down (noise
    level too small for the sample count, or vice versa).
    """
    if data.eps <= 0:
        raise DegenerateDataError("noise bound must be positive to fit an ellipsoid")
    # the metric is dominated by a nonnegative combination of the rank-one
    # regressor outers, so rank-deficient excitation can never yield an SPD fit
    Z0 = data.regressors()
    rank = int(np.linalg.matrix_rank(Z0))
    if rank < Z0.shape[0]:
        raise DegenerateDataError(
            f"regressors span only rank {rank} of {Z0.shape[0]}; "
            "collect more or richer samples"
        )
    prob, sigma_cap = _fit_problem(data, noise_gain, eta=eta, sigma_cap=sigma_cap)
    sol = maximize_logdet(prob, "metric", sigma_cap=sigma_cap, gap_tol=gap_tol,
                          max_outer=max_outer)
    if sol.status == "infeasible":
        raise DegenerateDataError(
            "ellipsoid fit has no feasible interior; samples are degenerate"
        )
    if sol.status == "unbounded" or sol.extras.get("cap_active"):
        raise EllipsoidUnboundedError(
            "ellipsoid volume is not bounded by the data; "
            "increase the sample count or the noise bound"
        )
    # a capped iteration count still yields a containing (sound) ellipsoid,
    # only slightly conservative in volume; keep it and record the gap
    try:
        return ellipsoid_from_fit(
            sol.assignment["metric"],
            sol.assignment["offset"],
            multipliers=sol.assignment["mult"].ravel(),
            log_volume=sol.objective,
            fit_gap=sol.extras.get("fw_gap"),
        )
    except (DefinitenessError, DegenerateDataError) as exc:
        raise DegenerateDataError(
            f"fitted metric is numerically singular ({exc}); samples are degenerate"
        ) from exc


def contains(ellipsoid: MatrixEllipsoid, A, B, tol=1e-9):
    """Whether the plant (A, B) lies in the ellipsoid, within tol."""
    Z = np.vstack([np.atleast_2d(A).T, np.atleast_2d(B).T])
    dev = Z - ellipsoid.center
    w, _ = sym_eig(dev.T @ ellipsoid.metric @ dev)
    return bool(w[-1] <= 1.0 + tol)


def sample_members(ellipsoid: MatrixEllipsoid, count, seed=0):
    """Plants drawn from the ellipsoid: center, then a boundary point, then
    uniformly random radii with random orientations."""
    n_z = ellipsoid.n_plant_rows
    n_x = ellipsoid.n_states
    rng = np.random.default_rng(seed)
    members = []
    for k in range(count):
        if k == 0:
            gamma = np.zeros((n_z, n_x))
        else:
            direction = rng.standard_normal((n_z, n_x))
            norm = np.linalg.norm(direction, 2)
            radius = 1.0 if k == 1 else rng.uniform(0.0, 1.0)
            gamma = radius * direction / norm
        Z = ellipsoid.center + ellipsoid.metric_inv_sqrt @ gamma
        Zt = Z.T
        members.append((Zt[:, :n_x].copy(), Zt[:, n_x:].copy()))
    return members
