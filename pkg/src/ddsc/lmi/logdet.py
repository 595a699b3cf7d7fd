"""Determinant maximization over LMI constraints via Frank-Wolfe.

maximize logdet(A) subject to the constraints of an LmiProblem reduces to a
sequence of linear-objective SDP solves: at each outer iteration the gradient
inv(A) defines the linearized objective, the linear subproblem is solved with
the embedded conic backend, and an exact line search along the segment keeps
every iterate feasible. A trace cap A <= sigma*I makes each subproblem bounded
even when the data fails to pin the ellipsoid down; a binding cap is reported
so callers can reject the fit instead of trusting an arbitrary volume.
"""

import numpy as np

from ..errors import AssemblyError
from .assemble import AssembledProblem, LmiSolution

__all__ = ["maximize_logdet"]


def _logdet_spd_local(a):
    w = np.linalg.eigvalsh(0.5 * (a + a.T))
    if w[0] <= 0:
        return -np.inf
    return float(np.sum(np.log(w)))


def _combine(old, new, t):
    return {k: (1.0 - t) * old[k] + t * new[k] for k in old}


def _line_search(A, Ahat):
    """Exact maximizer of logdet((1-t) A + t Ahat) on [0, 1], A spd."""
    L = np.linalg.cholesky(A)
    M = np.linalg.solve(L, np.linalg.solve(L, Ahat).T).T
    mu = np.linalg.eigvalsh(0.5 * (M + M.T))
    d = mu - 1.0

    def slope(t):
        return float(np.sum(d / (1.0 + t * d)))

    neg = d < 0
    t_bound = np.min(1.0 / -d[neg]) if neg.any() else np.inf
    hi = min(1.0, 0.999999 * t_bound)
    if slope(hi) >= 0:
        return hi
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if slope(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def maximize_logdet(problem, target, sigma_cap=None, gap_tol=1e-6, max_outer=100,
                    feastol=1e-8, gaptol=1e-8, maxiter=200, stall_window=20,
                    stall_tol=1e-7):
    """Maximize logdet of the symmetric variable `target` over the constraints.

    Returns an LmiSolution whose objective is the achieved logdet. extras
    carries ``fw_gap``, ``outer_iterations``, ``cap_active`` and the final
    line-search segment for diagnostics.
    """
    info = problem.variables.get(target)
    if info is None or info.kind not in ("sym", "diag"):
        raise AssemblyError(f"logdet target must be a symmetric variable, got {target!r}")
    order = info.shape[0]

    if sigma_cap is None:
        scale = 1.0
        for con in problem.constraints:
            scale = max(scale, float(np.abs(con.expr.const).max(initial=0.0)))
        sigma_cap = 1e4 * scale

    work = problem.clone()
    a_expr = work.var_expr(target)
    work.require_nsd(a_expr - sigma_cap * np.eye(order), name="logdet-cap")
    asm = AssembledProblem(work)
    solve_opts = dict(feastol=feastol, gaptol=gaptol, maxiter=maxiter)

    init = asm.solve(minimize=-a_expr.trace(), **solve_opts)
    if init.status in ("infeasible", "unbounded"):
        return init
    assignment = init.assignment
    A = assignment[target]
    total_inner = init.iterations

    if np.linalg.eigvalsh(A)[0] <= 1e-12 * max(1.0, float(np.abs(A).max())):
        # trace maximization can park on a face; probe the interior by
        # pushing the smallest eigenvalue up before giving up on the target
        floor_prob = work.clone()
        floor = floor_prob.scalar("_logdet_floor")
        a_floor = floor_prob.var_expr(target)
        floor_prob.require_psd(a_floor - floor * np.eye(order), name="logdet-floor")
        probe = AssembledProblem(floor_prob).solve(minimize=-1.0 * floor, **solve_opts)
        if probe.status in ("infeasible", "unbounded"):
            return probe
        total_inner += probe.iterations
        if float(probe.assignment["_logdet_floor"]) <= 1e-12 * sigma_cap:
            return LmiSolution(
                "infeasible", None, None, total_inner,
                extras={"detail": "no interior point for the logdet target"},
            )
        assignment = {k: v for k, v in probe.assignment.items() if k != "_logdet_floor"}
        A = assignment[target]

    gap = np.inf
    status = "max-iterations"
    outer = 0
    segment = None
    fault = None
    history = []
    for outer in range(1, max_outer + 1):
        W = np.linalg.inv(A)
        W = 0.5 * (W + W.T)
        sub = asm.solve(minimize=-(W @ a_expr).trace(), **solve_opts)
        if sub.status in ("infeasible", "unbounded"):
            # every subproblem shares the init's feasible set, so this can
            # only be an accuracy fault; retry looser, else keep the iterate
            total_inner += sub.iterations
            sub = asm.solve(
                minimize=-(W @ a_expr).trace(),
                feastol=min(feastol * 100, 1e-6),
                gaptol=min(gaptol * 100, 1e-6),
                maxiter=maxiter,
            )
            if sub.status in ("infeasible", "unbounded") or sub.assignment is None:
                fault = f"inner solve fault at outer {outer}: {sub.status}"
                break
        total_inner += sub.iterations
        if sub.assignment is None:
            fault = f"inner solve returned no iterate at outer {outer}"
            break
        Ahat = sub.assignment[target]
        lin = float(np.trace(W @ Ahat))
        if lin > 1e8 * order:
            return LmiSolution(
                "unbounded", None, None, total_inner,
                extras={"detail": "logdet objective grows without bound"},
            )
        gap = lin - order
        obj = _logdet_spd_local(A)
        history.append(obj)
        if gap <= gap_tol * (1.0 + abs(obj)):
            status = "optimal"
            break
        if (
            len(history) > stall_window
            and history[-1] - history[-1 - stall_window]
            <= stall_tol * (1.0 + abs(obj))
        ):
            fault = "objective stalled below the gap tolerance"
            break
        t = _line_search(A, Ahat)
        segment = (A.copy(), Ahat.copy(), t)
        assignment = _combine(assignment, sub.assignment, t)
        A = assignment[target]

    residuals = asm._constraint_report(assignment)
    cap_active = bool(np.linalg.eigvalsh(A)[-1] >= 0.99 * sigma_cap)
    return LmiSolution(
        status, assignment, _logdet_spd_local(A), total_inner, residuals,
        extras={
            "fw_gap": gap,
            "outer_iterations": outer,
            "sigma_cap": sigma_cap,
            "cap_active": cap_active,
            "line_segment": segment,
            "fault": fault,
        },
    )
