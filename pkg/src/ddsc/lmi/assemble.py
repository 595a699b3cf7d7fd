"""Flatten an LmiProblem into product-cone standard form and solve it.

Matrix inequality constraints become dense PSD blocks, scalar inequalities
collapse into one nonnegative-orthant block, and equality constraints are
eliminated in presolve by reparametrizing onto their null space. Degrees of
freedom that no constraint touches are pinned to zero so the normal equations
stay full rank; if the objective moves along such a direction the problem is
reported unbounded outright.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import AssemblyError
from .cones import ConeLayout, svec, svec_batch
from .conic import solve_conic
from .model import AffineExpr, LmiProblem

__all__ = ["LmiSolution", "AssembledProblem", "assemble", "solve"]


@dataclass
class LmiSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "max-iterations"
    assignment: dict | None
    objective: float | None
    iterations: int
    residuals: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == "optimal"


def _expr_columns(expr, var_slices, m, transform):
    """Rows of the flattened expression as an (entries, m) matrix plus constant."""
    r, c = expr.shape
    rows = np.zeros((r * c, m))
    for name, tensor in expr.terms.items():
        rows[:, var_slices[name]] = transform(tensor).reshape(tensor.shape[0], -1).T
    return rows, expr.const.reshape(-1)


class AssembledProblem:
    def __init__(self, problem: LmiProblem):
        self.problem = problem
        self.var_slices = {}
        off = 0
        for name, info in problem.variables.items():
            self.var_slices[name] = slice(off, off + info.dof)
            off += info.dof
        self.m = off
        if self.m == 0:
            raise AssemblyError("problem has no variables")

        lp_G, lp_h = [], []
        psd_blocks = []  # (order, Gblock, hblock)
        eq_G, eq_q = [], []
        self._cone_constraints = []

        for con in problem.constraints:
            expr = con.expr
            for name in expr.terms:
                if name not in self.var_slices:
                    raise AssemblyError(
                        f"constraint {con.name or con.kind!r} references "
                        f"undeclared variable {name!r}"
                    )
            if con.kind == "zero":
                rows, const = self._rows(expr)
                eq_G.append(rows)
                eq_q.append(-const)
                continue
            if con.kind == "nonneg" or expr.shape == (1, 1):
                rows, const = self._rows(expr)
                if con.kind in ("nonneg", "psd"):
                    # s = expr - shift >= 0
                    lp_G.append(-rows)
                    lp_h.append(const - con.shift)
                else:
                    # s = -(expr + shift) >= 0
                    lp_G.append(rows)
                    lp_h.append(-const - con.shift)
                self._cone_constraints.append(con)
                continue
            order = expr.shape[0]
            shift = np.eye(order) * con.shift
            sign = 1.0 if con.kind == "nsd" else -1.0
            f0 = sign * expr.const + shift
            Gblock = np.zeros((order * (order + 1) // 2, self.m))
            for name, tensor in expr.terms.items():
                Gblock[:, self.var_slices[name]] = svec_batch(sign * tensor).T
            psd_blocks.append((order, Gblock, svec(-f0)))
            self._cone_constraints.append(con)

        lp_dim = sum(b.shape[0] for b in lp_G)
        self.layout = ConeLayout(lp_dim, [p[0] for p in psd_blocks])
        dim = self.layout.dim
        self.G = np.zeros((dim, self.m))
        self.h = np.zeros(dim)
        if lp_dim:
            self.G[:lp_dim] = np.vstack(lp_G)
            self.h[:lp_dim] = np.concatenate(lp_h)
        for b, (order, Gblock, hblock) in enumerate(psd_blocks):
            offb = self.layout.psd_offsets[b]
            self.G[offb : offb + self.layout.psd_lens[b]] = Gblock
            self.h[offb : offb + self.layout.psd_lens[b]] = hblock

        # equality presolve: y = y_p + N z on the null space of the rows
        self.eq_inconsistent = False
        if eq_G:
            E = np.vstack(eq_G)
            q = np.concatenate(eq_q)
            U, sig, Vt = np.linalg.svd(E, full_matrices=True)
            tol = max(E.shape) * np.finfo(float).eps * (sig[0] if sig.size else 1.0)
            rank = int(np.sum(sig > tol))
            self.y_part = Vt[:rank].T @ ((U[:, :rank].T @ q) / sig[:rank])
            if np.linalg.norm(E @ self.y_part - q) > 1e-8 * (1.0 + np.linalg.norm(q)):
                self.eq_inconsistent = True
            self.null_basis = Vt[rank:].T  # (m, m - rank)
        else:
            self.y_part = np.zeros(self.m)
            self.null_basis = None

        Gz = self.G @ self.null_basis if self.null_basis is not None else self.G
        hz = self.h - self.G @ self.y_part
        col_norm = np.abs(Gz).max(axis=0) if Gz.size else np.zeros(Gz.shape[1])
        self.kept = np.flatnonzero(col_norm > 0.0)
        self.pinned = np.flatnonzero(col_norm == 0.0)
        self.Gk = Gz[:, self.kept]
        self.hk = hz

    def _rows(self, expr):
        transform = lambda t: t
        return _expr_columns(expr, self.var_slices, self.m, transform)

    # -- objective handling ------------------------------------------------------

    def _compile_objective(self, expr):
        g = np.zeros(self.m)
        for name, tensor in expr.terms.items():
            if name not in self.var_slices:
                raise AssemblyError(f"objective references undeclared variable {name!r}")
            g[self.var_slices[name]] += tensor[:, 0, 0]
        return g, float(expr.const[0, 0])

    def _reduce_objective(self, g_full):
        gz = self.null_basis.T @ g_full if self.null_basis is not None else g_full
        return gz

    # -- solve and unpack --------------------------------------------------------

    def solve(self, minimize=None, feastol=1e-8, gaptol=1e-8, maxiter=200):
        problem = self.problem
        if self.eq_inconsistent:
            return LmiSolution(
                "infeasible", None, None, 0, extras={"detail": "inconsistent equalities"}
            )

        obj_expr = minimize
        sense = 1.0
        if obj_expr is None and problem.objective is not None:
            obj_expr = problem.objective
            sense = 1.0 if problem.obj_sense == "min" else -1.0
        if obj_expr is not None:
            if obj_expr.shape != (1, 1):
                raise AssemblyError("objective must be scalar")
            g_full, offset = self._compile_objective(obj_expr)
            g_full = sense * g_full
        else:
            g_full = np.zeros(self.m)
            offset = 0.0

        gz = self._reduce_objective(g_full)
        if self.pinned.size and np.abs(gz[self.pinned]).max(initial=0.0) > 0.0:
            return LmiSolution(
                "unbounded",
                None,
                None,
                0,
                extras={"detail": "objective moves along an unconstrained direction"},
            )
        gk = gz[self.kept]

        if self.kept.size == 0:
            y_full = self.y_part
            assignment = self._unpack(y_full)
            residuals = self._constraint_report(assignment)
            status = "optimal" if residuals["constraint_violation"] <= 1e-8 else "infeasible"
            obj = self._objective_value(obj_expr, assignment, offset, sense)
            return LmiSolution(status, assignment if status == "optimal" else None,
                               obj if status == "optimal" else None, 0, residuals)

        res = solve_conic(
            self.Gk, self.hk, gk, self.layout,
            feastol=feastol, gaptol=gaptol, maxiter=maxiter,
        )
        if res.status in ("infeasible", "unbounded"):
            return LmiSolution(
                res.status, None, None, res.iterations,
                extras={"conic": res.metrics},
            )

        z = np.zeros(self.null_basis.shape[1] if self.null_basis is not None else self.m)
        z[self.kept] = res.y
        y_full = self.y_part + (self.null_basis @ z if self.null_basis is not None else z)
        assignment = self._unpack(y_full)
        residuals = self._constraint_report(assignment)
        residuals.update(
            duality_gap=res.metrics.get("relgap"),
            solver_primal=res.metrics.get("pres"),
            solver_dual=res.metrics.get("dres"),
        )
        obj = self._objective_value(obj_expr, assignment, offset, sense)
        return LmiSolution(res.status, assignment, obj, res.iterations, residuals,
                           extras={"conic": res.metrics})

    def _objective_value(self, obj_expr, assignment, offset, sense):
        if obj_expr is None:
            return 0.0
        return float(obj_expr.value(assignment)[0, 0])

    def _unpack(self, y_full):
        return {
            name: self.problem.var_value(name, y_full[self.var_slices[name]])
            for name in self.problem.variables
        }

    def _constraint_report(self, assignment):
        worst = 0.0
        worst_eq = 0.0
        strict_ratio = None
        for con in self.problem.constraints:
            val = con.expr.value(assignment)
            if con.kind == "zero":
                worst_eq = max(worst_eq, float(np.abs(val).max(initial=0.0)))
                continue
            if con.kind == "nonneg":
                worst = max(worst, float(max(0.0, -val.min(initial=0.0))))
                continue
            if val.shape == (1, 1):
                v = float(val[0, 0])
                margin = -v if con.kind == "nsd" else v
            else:
                eigs = np.linalg.eigvalsh(0.5 * (val + val.T))
                margin = -eigs[-1] if con.kind == "nsd" else eigs[0]
            worst = max(worst, max(0.0, -margin))
            if con.strict and con.shift > 0:
                ratio = margin / con.shift
                strict_ratio = ratio if strict_ratio is None else min(strict_ratio, ratio)
        return {
            "constraint_violation": worst,
            "equality_violation": worst_eq,
            "strict_margin_ratio": strict_ratio,
        }

    def dump(self):
        lines = ["variables:"]
        for name, info in self.problem.variables.items():
            lines.append(f"  {name}: {info.kind} {info.shape} dof={info.dof}")
        lines.append("constraints:")
        for con in self.problem.constraints:
            tag = f" [{con.name}]" if con.name else ""
            strict = " strict" if con.strict else ""
            lines.append(f"  {con.kind}{strict} {con.expr.shape}{tag}")
        lines.append(
            f"cone: lp={self.layout.lp_dim} psd={self.layout.psd_orders} dof={self.m} "
            f"(kept={self.kept.size}, pinned={self.pinned.size})"
        )
        return "\n".join(lines)


def assemble(problem):
    return AssembledProblem(problem)


def solve(problem, **options):
    """Assemble and solve in one call."""
    return AssembledProblem(problem).solve(**options)
