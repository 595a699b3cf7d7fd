"""Independent verification of closed-loop designs.

True norms come from Gramians and bisection, robustness from Monte-Carlo
sweeps over the membership set. Every accept/reject decision here is a direct
eigenvalue computation on a numeric matrix; optimizer output only ever enters
as a candidate to be checked, so this module stays honest even when the
synthesis path has a bug.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import StabilityError, UnsupportedChannelError
from .lmi import LmiProblem, bmat, hsym
from .lmi.assemble import solve as lmi_solve
from .lti import LtiSystem, SparsityPattern, closed_loop, transfer_matrix
from .matops import is_hurwitz, solve_lyapunov, spectral_norm, sym_eig
from .synthesis import (
    robust_h2_matrix,
    robust_hinf_matrix,
    robust_stab_matrix,
)
from .uncertainty import sample_members

__all__ = [
    "CertificationReport",
    "h2_norm",
    "hinf_norm",
    "certify_robust",
    "structural_residual",
]


def _abscissa(a):
    """Largest real part over the spectrum of a."""
    return float(np.max(np.linalg.eigvals(a).real))


def _max_eig(m):
    w, _ = sym_eig(m)
    return float(w[-1])


def h2_norm(sys, K):
    """Energy of the disturbance impulse response under u = K x.

    Computed from the observability Gramian of the closed loop, so it is the
    exact norm up to the linear-solve roundoff, with no frequency sampling.
    """
    a_cl, c_cl = closed_loop(sys, K)
    if np.any(sys.H != 0.0):
        raise UnsupportedChannelError(
            "direct disturbance feedthrough makes the H2 norm infinite; zero H first"
        )
    if not is_hurwitz(a_cl):
        raise StabilityError("closed loop is not Hurwitz; the H2 norm is infinite")
    p_obs = solve_lyapunov(a_cl, c_cl.T @ c_cl)
    return float(np.sqrt(max(np.trace(sys.G.T @ p_obs @ sys.G), 0.0)))


def _frequency_peak(a_cl, g, c_cl, h, points=400, zoom_rounds=3):
    """Peak singular value of the disturbance response over a log sweep.

    The base grid spans six decades around the closed-loop eigenvalue
    magnitudes and is refined around its running maximum; the endpoints
    omega = 0 and omega -> inf are handled exactly. A grid maximum is always
    a lower bound on the true peak.
    """
    eigs = np.linalg.eigvals(a_cl)
    scale = max(1.0, float(np.abs(eigs).max()))
    lo, hi = 1e-3, 1e3 * scale

    def gain(omega):
        # complex response; matops.spectral_norm is real-only by contract
        return float(np.linalg.norm(transfer_matrix(a_cl, g, c_cl, h, omega), 2))

    def sweep(omegas):
        vals = np.array([gain(w) for w in omegas])
        i = int(np.argmax(vals))
        return float(vals[i]), omegas[max(i - 1, 0)], omegas[min(i + 1, len(omegas) - 1)]

    static = c_cl @ np.linalg.solve(-a_cl, g) + h
    peak = max(spectral_norm(static), spectral_norm(h))
    grid = np.logspace(np.log10(lo), np.log10(hi), points)
    best, left, right = sweep(grid)
    for _ in range(zoom_rounds):
        if best <= peak:
            break
        best, left, right = sweep(np.logspace(np.log10(left), np.log10(right), 50))
    return max(peak, best)


def _gain_bound_block(a_cl, g, c_cl, h, gamma, p):
    """Numeric bounded-gain matrix at a fixed Lyapunov candidate p."""
    nd = g.shape[1]
    ny = c_cl.shape[0]
    return np.block(
        [
            [p @ a_cl + a_cl.T @ p, p @ g, c_cl.T],
            [g.T @ p, -gamma * np.eye(nd), h.T],
            [c_cl, h, -gamma * np.eye(ny)],
        ]
    )


def _gain_bound_feasible(a_cl, g, c_cl, h, gamma):
    # Feasibility is decided by eigenchecking the returned candidate, never
    # by the solver's status word.
    prob = LmiProblem(eta=1e-9)
    p = prob.sym("P", a_cl.shape[0])
    prob.require_psd(p, strict=True, name="P-spd")
    nd = g.shape[1]
    ny = c_cl.shape[0]
    blk = bmat(
        [
            [hsym(p @ a_cl), p @ g, c_cl.T],
            [(p @ g).T, -gamma * np.eye(nd), h.T],
            [c_cl, h, -gamma * np.eye(ny)],
        ]
    )
    prob.require_nsd(blk, strict=True, name="gain-bound")
    sol = lmi_solve(prob)
    if sol.assignment is None or "P" not in sol.assignment:
        return False
    pv = 0.5 * (sol.assignment["P"] + sol.assignment["P"].T)
    if np.linalg.eigvalsh(pv)[0] <= 0.0:
        return False
    return _max_eig(_gain_bound_block(a_cl, g, c_cl, h, gamma, pv)) < 0.0


def hinf_norm(sys, K, tol=1e-4):
    """Worst-case disturbance-to-output energy gain under u = K x.

    A frequency sweep seeds the bracket, then bisection on the feasibility of
    the bounded-gain inequality pins the value to the requested relative
    tolerance. Nonzero feedthrough H is fine here.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a_cl, c_cl = closed_loop(sys, K)
    if not is_hurwitz(a_cl):
        raise StabilityError("closed loop is not Hurwitz; the gain is unbounded")
    est = _frequency_peak(a_cl, sys.G, c_cl, sys.H)
    if est == 0.0:
        return 0.0
    lo, hi = 0.0, 2.0 * est + 1.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _gain_bound_feasible(a_cl, sys.G, c_cl, sys.H, mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def structural_residual(K, pat: SparsityPattern):
    """Frobenius mass sitting on the entries the pattern forbids."""
    return pat.residual(K)


@dataclass
class CertificationReport:
    """Audit results for one synthesis outcome.

    member_abscissa and member_margin line up with the sampled plants (center
    first, then a boundary point, then random interior members); margins are
    minimum eigenvalue slacks, positive meaning satisfied.
    """

    hurwitz_truth: bool
    hurwitz_sampled_fraction: float
    true_h2: float | None
    true_hinf: float | None
    bound_gamma: float | None
    residual: float
    lmi_margins: dict = field(default_factory=dict)
    member_abscissa: np.ndarray | None = None
    member_margin: np.ndarray | None = None
    samples: int = 0

    def __post_init__(self):
        if not 0.0 <= self.hurwitz_sampled_fraction <= 1.0:
            raise ValueError("sampled fraction must lie in [0, 1]")
        for label, val in (("true_h2", self.true_h2), ("true_hinf", self.true_hinf)):
            if val is not None and val < 0:
                raise ValueError(f"{label} must be nonnegative")


def _channels_for(objective, channels, ell):
    if objective == "stabilize":
        return None
    if channels is None:
        raise ValueError(f"{objective} certification needs (C, D, G) channels")
    if len(channels) == 3:
        C, D, G = (np.atleast_2d(np.asarray(m, dtype=float)) for m in channels)
        H = np.zeros((C.shape[0], G.shape[1]))
    else:
        C, D, G, H = (np.atleast_2d(np.asarray(m, dtype=float)) for m in channels)
    n_x, n_u = ell.n_states, ell.n_inputs
    if C.shape[1] != n_x or D.shape != (C.shape[0], n_u):
        raise ValueError("channel dimensions do not match the plant")
    if G.shape[0] != n_x or H.shape != (C.shape[0], G.shape[1]):
        raise ValueError("channel dimensions do not match the plant")
    if objective == "h2" and np.any(H != 0.0):
        raise UnsupportedChannelError("the H2 objective requires H = 0")
    return C, D, G, H


def certify_robust(ell, outcome, objective, channels=None, samples=1000, seed=0):
    """Monte-Carlo audit of a synthesis outcome over the membership set.

    Two layers: the robust matrix inequality is eigenchecked once at the
    reported (K, P, lambda, gamma), and then every sampled member plant is
    checked for Hurwitz stability plus, for performance objectives, the
    per-plant gain inequality at the shared certificate. The report never
    raises on a failed check; it just records the damage.
    """
    if objective not in ("stabilize", "h2", "hinf"):
        raise ValueError(f"unknown objective {objective!r}")
    if not outcome.ok:
        raise ValueError(f"cannot certify a {outcome.status!r} outcome")
    if samples < 1:
        raise ValueError("need at least one sample")
    K, P = outcome.K, outcome.P
    chan = _channels_for(objective, channels, ell)

    margins = {"p_positive": float(np.linalg.eigvalsh(0.5 * (P + P.T))[0])}
    if objective == "stabilize":
        robust = robust_stab_matrix(ell, K, P)
    elif objective == "h2":
        C, D, G, H = chan
        robust = robust_h2_matrix(ell, K, P, outcome.lam, C, D)
        margins["h2_trace_slack"] = float(
            outcome.gamma**2 - np.trace(G.T @ P @ G)
        )
    else:
        C, D, G, H = chan
        robust = robust_hinf_matrix(
            ell, K, P, outcome.lam, outcome.gamma, C, D, G, H
        )
    margins["robust_inequality"] = -_max_eig(robust)

    if objective != "stabilize":
        c_cl = chan[0] + chan[1] @ K

    members = sample_members(ell, samples, seed)
    abscissas = np.empty(samples)
    member_margin = np.empty(samples) if objective != "stabilize" else None
    for i, (A_i, B_i) in enumerate(members):
        a_cl = A_i + B_i @ K
        abscissas[i] = _abscissa(a_cl)
        if objective == "h2":
            member_margin[i] = -_max_eig(P @ a_cl + a_cl.T @ P + c_cl.T @ c_cl)
        elif objective == "hinf":
            member_margin[i] = -_max_eig(
                _gain_bound_block(a_cl, chan[2], c_cl, chan[3], outcome.gamma, P)
            )
    if member_margin is not None:
        margins["member_worst"] = float(member_margin.min())

    hurwitz_truth = bool(abscissas[0] < 0.0)
    true_h2 = true_hinf = None
    if objective != "stabilize" and hurwitz_truth:
        A0, B0 = members[0]
        sys0 = LtiSystem(A=A0, B=B0, G=chan[2], C=chan[0], D=chan[1], H=chan[3])
        if objective == "h2":
            true_h2 = h2_norm(sys0, K)
        else:
            true_hinf = hinf_norm(sys0, K)

    mask = outcome.extras.get("pattern")
    residual = 0.0 if mask is None else structural_residual(K, SparsityPattern(mask))

    return CertificationReport(
        hurwitz_truth=hurwitz_truth,
        hurwitz_sampled_fraction=float(np.mean(abscissas < 0.0)),
        true_h2=true_h2,
        true_hinf=true_hinf,
        bound_gamma=outcome.gamma,
        residual=residual,
        lmi_margins=margins,
        member_abscissa=abscissas,
        member_margin=member_margin,
        samples=samples,
    )
