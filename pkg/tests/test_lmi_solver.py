import numpy as np
import pytest

from ddsc import synthesis, uncertainty
from ddsc.errors import AssemblyError
from ddsc.lmi import LmiProblem, assemble, hsym, maximize_logdet, solve
from ddsc.lti import CollectConfig, make_mass_spring, simulate_collect


def min_trace_problem(order, scale=1.0):
    """min tr(P) subject to P >= I, optionally with rescaled constraint data."""
    prob = LmiProblem()
    P = prob.sym("P", order)
    prob.require_psd(scale * (P - np.eye(order)), name="floor")
    prob.minimize(P.trace())
    return prob


def lyapunov_problem(a, scale=1.0, minimize_trace=False):
    prob = LmiProblem()
    P = prob.sym("P", a.shape[0])
    prob.require_psd(scale * P, strict=True, name="P-spd")
    prob.require_nsd(scale * hsym(P @ a), strict=True, name="decay")
    if minimize_trace:
        prob.minimize(P.trace())
    return prob


def contradiction_problem(scale=1.0):
    prob = LmiProblem()
    P = prob.sym("P", 2)
    prob.require_psd(scale * P, strict=True)
    prob.require_nsd(scale * P, strict=True)
    return prob


# -- modeling layer -----------------------------------------------------------


def test_expression_evaluation_matches_numpy():
    prob = LmiProblem()
    P = prob.sym("P", 2)
    M = np.array([[2.0, 1.0], [0.0, 1.0]])
    expr = hsym(M @ P) + 5.0 * np.eye(2)
    X = np.array([[1.0, 0.5], [0.5, 3.0]])
    want = M @ X + X @ M.T + 5.0 * np.eye(2)
    np.testing.assert_allclose(expr.value({"P": X}), want, atol=1e-14)


def test_expression_products_are_rejected():
    prob = LmiProblem()
    P = prob.sym("P", 2)
    with pytest.raises(AssemblyError, match="not affine"):
        P @ P


def test_duplicate_variable_rejected():
    prob = LmiProblem()
    prob.sym("P", 2)
    with pytest.raises(AssemblyError, match="declared twice"):
        prob.sym("P", 3)


def test_asymmetric_constraint_block_rejected():
    prob = LmiProblem()
    P = prob.sym("P", 2)
    shove = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(AssemblyError, match="not symmetric"):
        prob.require_psd(P + shove)


def test_mixing_problems_rejected_in_algebra():
    p1 = LmiProblem()
    p2 = LmiProblem()
    a = p1.sym("A", 2)
    b = p2.sym("B", 2)
    with pytest.raises(AssemblyError, match="different problems"):
        a + b


# -- assembly -----------------------------------------------------------------


def test_min_trace_assembles_to_one_psd_block():
    asm = assemble(min_trace_problem(2))
    assert asm.layout.psd_orders == [2]
    assert asm.layout.lp_dim == 0
    assert "psd=[2]" in asm.dump()


def test_unknown_variable_in_terms_rejected():
    prob = LmiProblem()
    with pytest.raises(AssemblyError, match="unknown variable"):
        prob.expr_from_terms((1, 1), {"ghost": np.zeros((1, 1, 1))})


def test_constraint_on_undeclared_variable_rejected():
    donor = LmiProblem()
    Q = donor.sym("Q", 2)
    prob = LmiProblem()
    prob.scalar("t")
    prob.require_psd(Q - np.eye(2))
    with pytest.raises(AssemblyError, match="undeclared variable 'Q'"):
        assemble(prob)


def test_objective_on_undeclared_variable_rejected():
    donor = LmiProblem()
    R = donor.sym("R", 2)
    prob = LmiProblem()
    S = prob.sym("S", 2)
    prob.require_psd(S)
    with pytest.raises(AssemblyError, match="undeclared variable 'R'"):
        assemble(prob).solve(minimize=R.trace())


def test_robust_stabilization_cone_layout(point_ell):
    # one robust block of state + lifted-plant order sits next to the X > 0 block
    prob, _ = synthesis._unstructured_problem(
        point_ell, "stabilize", None, synthesis.AlgoConfig()
    )
    asm = assemble(prob)
    assert asm.layout.psd_orders == [4, 10]


# -- conic solve ----------------------------------------------------------------


@pytest.mark.parametrize("order", range(2, 11))
def test_min_trace_over_identity(order):
    sol = solve(min_trace_problem(order))
    assert sol.ok
    assert abs(sol.objective - order) <= 1e-6
    assert sol.residuals["duality_gap"] < 1e-8


def test_min_trace_solution_is_identity():
    sol = solve(min_trace_problem(3))
    np.testing.assert_allclose(sol.assignment["P"], np.eye(3), rtol=0, atol=1e-6)


def test_contradictory_signs_infeasible():
    sol = solve(contradiction_problem())
    assert sol.status == "infeasible"
    assert sol.assignment is None


def test_lyapunov_feasibility_certified_by_eigencheck():
    a = np.diag([-1.0, -2.0])
    sol = solve(lyapunov_problem(a))
    assert sol.ok
    P = sol.assignment["P"]
    assert np.linalg.eigvalsh(P)[0] > 0
    assert np.linalg.eigvalsh(a.T @ P + P @ a)[-1] < 0


def test_unbounded_objective_detected():
    prob = LmiProblem()
    P = prob.sym("P", 2)
    prob.require_nsd(P - np.eye(2))
    prob.minimize(P.trace())
    assert solve(prob).status == "unbounded"


def test_unconstrained_objective_direction_is_unbounded():
    prob = LmiProblem()
    P = prob.sym("P", 2)
    c = prob.scalar("c")
    prob.require_psd(P - np.eye(2))
    prob.minimize(c)
    sol = solve(prob)
    assert sol.status == "unbounded"
    assert "unconstrained direction" in sol.extras["detail"]


def test_equality_presolve_pins_entries_exactly():
    prob = LmiProblem()
    P = prob.sym("P", 2)
    prob.require_zero(P.take([(0, 1)]), name="offdiag")
    prob.require_psd(P - np.eye(2))
    prob.minimize(P.trace())
    sol = solve(prob)
    assert sol.ok
    assert abs(sol.objective - 2.0) <= 1e-6
    assert sol.assignment["P"][0, 1] == 0.0


def test_inconsistent_equalities_reported_infeasible():
    prob = LmiProblem()
    t = prob.scalar("t")
    prob.require_zero(t - 1.0)
    prob.require_zero(t + 1.0)
    sol = solve(prob)
    assert sol.status == "infeasible"
    assert "inconsistent" in sol.extras["detail"]


# -- solution invariants ---------------------------------------------------------


def test_assignment_is_exactly_symmetric():
    sol = solve(min_trace_problem(4))
    P = sol.assignment["P"]
    assert np.array_equal(P, P.T)


def test_strict_margin_survives_minimization():
    # the objective presses toward the strict boundary; the shifted margin
    # must still retain at least half of eta
    a = np.array([[-1.0, 0.3, 0.0], [0.0, -2.0, 0.1], [0.0, 0.0, -0.7]])
    sol = solve(lyapunov_problem(a, minimize_trace=True))
    assert sol.ok
    assert sol.residuals["strict_margin_ratio"] >= 0.5


def test_status_unchanged_under_data_rescaling():
    def statuses(scale):
        a = np.diag([-1.0, -2.0])
        return (
            solve(min_trace_problem(3, scale=scale)).status,
            solve(contradiction_problem(scale=scale)).status,
            solve(lyapunov_problem(a, scale=scale)).status,
        )

    assert statuses(1.0) == statuses(10.0)


def test_repeat_solves_are_bit_identical():
    a = np.array([[-1.0, 0.3, 0.0], [0.0, -2.0, 0.1], [0.0, 0.0, -0.7]])
    s1 = solve(lyapunov_problem(a, minimize_trace=True))
    s2 = solve(lyapunov_problem(a, minimize_trace=True))
    assert s1.objective == s2.objective
    assert s1.iterations == s2.iterations
    assert np.array_equal(s1.assignment["P"], s2.assignment["P"])


# -- determinant maximization ------------------------------------------------------


def test_logdet_capped_by_identity():
    prob = LmiProblem()
    A = prob.sym("A", 2)
    prob.require_nsd(A - np.eye(2))
    sol = maximize_logdet(prob, "A")
    assert sol.ok
    assert abs(sol.objective) <= 1e-6
    np.testing.assert_allclose(sol.assignment["A"], np.eye(2), rtol=0, atol=1e-6)


def test_logdet_capped_by_diagonal():
    prob = LmiProblem()
    A = prob.sym("A", 2)
    prob.require_nsd(A - np.diag([1.0, 4.0]))
    sol = maximize_logdet(prob, "A")
    assert sol.ok
    assert abs(sol.objective - np.log(4.0)) <= 1e-6
    assert not sol.extras["cap_active"]


def test_logdet_target_must_be_symmetric():
    prob = LmiProblem()
    prob.scalar("s")
    with pytest.raises(AssemblyError, match="symmetric variable"):
        maximize_logdet(prob, "s")
    with pytest.raises(AssemblyError, match="symmetric variable"):
        maximize_logdet(prob, "missing")


def test_logdet_without_interior_is_infeasible():
    # pinning a diagonal entry to zero leaves no SPD point at all
    prob = LmiProblem()
    A = prob.sym("A", 2)
    prob.require_zero(A.take([(1, 1)]), name="pin")
    prob.require_psd(A)
    sol = maximize_logdet(prob, "A")
    assert sol.status == "infeasible"
    assert "no interior" in sol.extras["detail"]


def test_logdet_unbounded_volume_flagged_by_cap():
    prob = LmiProblem()
    A = prob.sym("A", 2)
    prob.require_psd(A - np.eye(2))
    sol = maximize_logdet(prob, "A")
    assert sol.extras["cap_active"]


def test_fit_line_search_is_globally_optimal_on_final_segment():
    sys = make_mass_spring(2)
    data = simulate_collect(sys, CollectConfig(T=40, eps=0.01, seed=1))
    prob, cap = uncertainty._fit_problem(data, sys.G)
    sol = maximize_logdet(prob, "metric", sigma_cap=cap, max_outer=1000)
    assert sol.ok
    segment = sol.extras["line_segment"]
    assert segment is not None
    start, end, _ = segment

    def along(t):
        w = np.linalg.eigvalsh((1.0 - t) * start + t * end)
        return float(np.sum(np.log(w))) if w[0] > 0 else -np.inf

    # golden-section maximization of logdet along the last accepted segment
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, 1.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = along(c), along(d)
    for _ in range(200):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = along(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = along(d)
    best = max(fc, fd)
    assert abs(best - sol.objective) <= 1e-6 * (1.0 + abs(sol.objective))
    assert np.linalg.eigvalsh(sol.assignment["metric"])[0] > 0
