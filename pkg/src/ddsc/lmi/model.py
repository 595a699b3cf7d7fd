"""Declarative LMI problems over affine matrix expressions.

A problem owns a set of matrix/scalar variables. Expressions are affine maps
of the stacked variable vector, stored per variable as a coefficient tensor
(one slice per scalar degree of freedom) plus a constant block, so building
block LMIs is plain tensor bookkeeping. `assemble` flattens everything into
one conic standard form (PSD blocks plus a nonnegative-orthant block) that the
embedded interior-point backend consumes.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import AssemblyError

__all__ = ["AffineExpr", "LmiProblem", "Constraint", "bmat", "hsym"]


def _const_block(value, shape):
    out = np.asarray(value, dtype=float)
    if out.shape != shape:
        raise AssemblyError(f"constant block has shape {out.shape}, expected {shape}")
    return out


class AffineExpr:
    """Matrix-valued affine expression F0 + sum_d y_d F_d.

    `terms` maps a variable name to a (dof, rows, cols) tensor of coefficient
    slices; `const` is the constant block. Supports +, -, scalar *, constant @
    on either side, .T, trace, and entry selection. Products of two
    expressions are rejected (not affine).
    """

    __slots__ = ("prob", "shape", "const", "terms")

    # make ndarray @ expr / ndarray + expr defer to the reflected methods
    __array_ufunc__ = None

    def __init__(self, prob, shape, const=None, terms=None):
        self.prob = prob
        self.shape = tuple(shape)
        self.const = (
            np.zeros(self.shape) if const is None else _const_block(const, self.shape)
        )
        self.terms = {} if terms is None else dict(terms)

    # -- construction helpers -------------------------------------------------

    def _like(self, shape, const, terms):
        return AffineExpr(self.prob, shape, const, terms)

    def _coerce(self, other):
        """Turn `other` into (const, terms) matching self's shape for +/-."""
        if isinstance(other, AffineExpr):
            if other.prob is not self.prob:
                raise AssemblyError("cannot mix expressions from different problems")
            if other.shape != self.shape:
                raise AssemblyError(f"shape mismatch: {self.shape} vs {other.shape}")
            return other.const, other.terms
        arr = np.asarray(other, dtype=float)
        if arr.ndim == 0 and self.shape == (1, 1):
            arr = arr.reshape(1, 1)
        if arr.shape != self.shape:
            raise AssemblyError(f"shape mismatch: {self.shape} vs {arr.shape}")
        return arr, {}

    # -- algebra ---------------------------------------------------------------

    def __add__(self, other):
        oconst, oterms = self._coerce(other)
        terms = dict(self.terms)
        for name, tensor in oterms.items():
            terms[name] = terms[name] + tensor if name in terms else tensor
        return self._like(self.shape, self.const + oconst, terms)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * _as_expr_like(self, other)

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if isinstance(other, AffineExpr):
            raise AssemblyError("product of two expressions is not affine")
        arr = np.asarray(other, dtype=float)
        if arr.ndim == 0:
            c = float(arr)
            return self._like(
                self.shape, c * self.const, {k: c * v for k, v in self.terms.items()}
            )
        # scalar expression times a constant matrix
        if self.shape != (1, 1):
            raise AssemblyError("only scalar expressions can scale a constant matrix")
        arr = np.atleast_2d(arr)
        terms = {k: v[:, :1, :1] * arr for k, v in self.terms.items()}
        return self._like(arr.shape, float(self.const[0, 0]) * arr, terms)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, AffineExpr):
            raise AssemblyError("product of two expressions is not affine")
        arr = np.atleast_2d(np.asarray(other, dtype=float))
        if self.shape[1] != arr.shape[0]:
            raise AssemblyError(f"matmul mismatch: {self.shape} @ {arr.shape}")
        terms = {k: np.matmul(v, arr) for k, v in self.terms.items()}
        return self._like((self.shape[0], arr.shape[1]), self.const @ arr, terms)

    def __rmatmul__(self, other):
        arr = np.atleast_2d(np.asarray(other, dtype=float))
        if arr.shape[1] != self.shape[0]:
            raise AssemblyError(f"matmul mismatch: {arr.shape} @ {self.shape}")
        terms = {k: np.matmul(arr, v) for k, v in self.terms.items()}
        return self._like((arr.shape[0], self.shape[1]), arr @ self.const, terms)

    @property
    def T(self):
        terms = {k: np.swapaxes(v, 1, 2) for k, v in self.terms.items()}
        return self._like((self.shape[1], self.shape[0]), self.const.T, terms)

    def trace(self):
        if self.shape[0] != self.shape[1]:
            raise AssemblyError("trace of a non-square expression")
        terms = {
            k: np.trace(v, axis1=1, axis2=2).reshape(-1, 1, 1)
            for k, v in self.terms.items()
        }
        return self._like((1, 1), np.array([[np.trace(self.const)]]), terms)

    def take(self, entries):
        """Column expression of the listed (row, col) entries."""
        rows = [i for i, _ in entries]
        cols = [j for _, j in entries]
        const = self.const[rows, cols].reshape(-1, 1)
        terms = {k: v[:, rows, cols][:, :, None] for k, v in self.terms.items()}
        return self._like((len(entries), 1), const, terms)

    def value(self, assignment):
        """Evaluate at a {name: value} assignment (values as produced by solve)."""
        out = self.const.copy()
        for name, tensor in self.terms.items():
            dof = self.prob.var_dof_vector(name, assignment[name])
            out += np.tensordot(dof, tensor, axes=(0, 0))
        return out

    def is_constant(self):
        return not self.terms or all(np.all(v == 0) for v in self.terms.values())


def _as_expr_like(ref, other):
    if isinstance(other, AffineExpr):
        return other
    arr = np.asarray(other, dtype=float)
    if arr.ndim == 0 and ref.shape == (1, 1):
        arr = arr.reshape(1, 1)
    return AffineExpr(ref.prob, arr.shape, arr, {})


def hsym(expr):
    """Symmetric part doubled: expr + expr.T."""
    return expr + expr.T


def bmat(rows):
    """Assemble a block matrix of expressions and constant arrays.

    Entries may be AffineExpr, ndarray, or scalar 0 (meaning a zero block of
    the inferred size). Block sizes must be consistent.
    """
    prob = None
    for row in rows:
        for e in row:
            if isinstance(e, AffineExpr):
                prob = e.prob
                break
        if prob is not None:
            break
    if prob is None:
        raise AssemblyError("bmat needs at least one AffineExpr entry")

    n_rows, n_cols = len(rows), len(rows[0])
    if any(len(r) != n_cols for r in rows):
        raise AssemblyError("ragged block structure")

    def entry_shape(e):
        if isinstance(e, AffineExpr):
            return e.shape
        if np.isscalar(e) and e == 0:
            return None
        return np.atleast_2d(np.asarray(e)).shape

    heights = [None] * n_rows
    widths = [None] * n_cols
    for i, row in enumerate(rows):
        for j, e in enumerate(row):
            sh = entry_shape(e)
            if sh is None:
                continue
            if heights[i] is None:
                heights[i] = sh[0]
            elif heights[i] != sh[0]:
                raise AssemblyError(f"inconsistent height in block row {i}")
            if widths[j] is None:
                widths[j] = sh[1]
            elif widths[j] != sh[1]:
                raise AssemblyError(f"inconsistent width in block column {j}")
    if any(h is None for h in heights) or any(w is None for w in widths):
        raise AssemblyError("could not infer the size of a zero block")

    rtot, ctot = sum(heights), sum(widths)
    roff = np.concatenate([[0], np.cumsum(heights)])
    coff = np.concatenate([[0], np.cumsum(widths)])

    const = np.zeros((rtot, ctot))
    tensors = {}
    for i, row in enumerate(rows):
        for j, e in enumerate(row):
            rs, re = roff[i], roff[i + 1]
            cs, ce = coff[j], coff[j + 1]
            if isinstance(e, AffineExpr):
                if e.prob is not prob:
                    raise AssemblyError("cannot mix expressions from different problems")
                const[rs:re, cs:ce] = e.const
                for name, tensor in e.terms.items():
                    if name not in tensors:
                        tensors[name] = np.zeros((tensor.shape[0], rtot, ctot))
                    tensors[name][:, rs:re, cs:ce] += tensor
            elif np.isscalar(e) and e == 0:
                continue
            else:
                const[rs:re, cs:ce] = np.atleast_2d(np.asarray(e, dtype=float))
    return AffineExpr(prob, (rtot, ctot), const, tensors)


@dataclass
class Constraint:
    expr: AffineExpr
    kind: str  # "nsd" | "psd" | "nonneg" | "zero"
    strict: bool = False
    shift: float = 0.0
    name: str = ""


@dataclass
class _VarInfo:
    name: str
    kind: str  # "sym" | "diag" | "mat" | "scalar"
    dof: int
    shape: tuple
    entries: list  # dof -> (i, j) for matrix kinds


class LmiProblem:
    """Container for variables, affine constraints, and a linear objective."""

    def __init__(self, eta=1e-6):
        self.eta = float(eta)
        self.variables: dict[str, _VarInfo] = {}
        self.constraints: list[Constraint] = []
        self.objective: AffineExpr | None = None
        self.obj_sense = "min"

    # -- variable declaration --------------------------------------------------

    def _register(self, info):
        if info.name in self.variables:
            raise AssemblyError(f"variable {info.name!r} declared twice")
        if not info.name:
            raise AssemblyError("variable name must be nonempty")
        self.variables[info.name] = info

    def sym(self, name, order, diag=False):
        """Symmetric matrix variable; diag=True restricts it to diagonal."""
        order = int(order)
        if diag:
            entries = [(i, i) for i in range(order)]
            info = _VarInfo(name, "diag", order, (order, order), entries)
        else:
            entries = [(i, j) for i in range(order) for j in range(i + 1)]
            info = _VarInfo(name, "sym", len(entries), (order, order), entries)
        self._register(info)
        tensor = np.zeros((info.dof, order, order))
        for d, (i, j) in enumerate(entries):
            tensor[d, i, j] = 1.0
            tensor[d, j, i] = 1.0
        return AffineExpr(self, (order, order), None, {name: tensor})

    def mat(self, name, rows, cols, pattern=None):
        """Rectangular matrix variable, optionally masked to pattern == 1."""
        rows, cols = int(rows), int(cols)
        if pattern is None:
            entries = [(i, j) for i in range(rows) for j in range(cols)]
        else:
            pattern = np.asarray(pattern)
            if pattern.shape != (rows, cols):
                raise AssemblyError(f"pattern shape {pattern.shape} != ({rows}, {cols})")
            entries = [(i, j) for i in range(rows) for j in range(cols) if pattern[i, j]]
        if not entries:
            raise AssemblyError(f"variable {name!r} has no free entries")
        info = _VarInfo(name, "mat", len(entries), (rows, cols), entries)
        self._register(info)
        tensor = np.zeros((info.dof, rows, cols))
        for d, (i, j) in enumerate(entries):
            tensor[d, i, j] = 1.0
        return AffineExpr(self, (rows, cols), None, {name: tensor})

    def scalar(self, name, nonneg=False):
        info = _VarInfo(name, "scalar", 1, (1, 1), [(0, 0)])
        self._register(info)
        expr = AffineExpr(self, (1, 1), None, {name: np.ones((1, 1, 1))})
        if nonneg:
            self.require_nonneg(expr, name=f"{name}>=0")
        return expr

    def expr_from_terms(self, shape, terms, const=None):
        """Build an expression directly from coefficient tensors.

        Useful when a sum over many data blocks would otherwise be built one
        rank-one expression at a time.
        """
        for name, tensor in terms.items():
            if name not in self.variables:
                raise AssemblyError(f"unknown variable {name!r}")
            want = (self.variables[name].dof,) + tuple(shape)
            if tensor.shape != want:
                raise AssemblyError(f"tensor for {name!r} has shape {tensor.shape}, expected {want}")
        return AffineExpr(self, shape, const, terms)

    def var_expr(self, name):
        """Fresh expression for a declared variable."""
        info = self.variables[name]
        tensor = np.zeros((info.dof,) + info.shape)
        for d, (i, j) in enumerate(info.entries):
            tensor[d, i, j] = 1.0
            if info.kind in ("sym", "diag"):
                tensor[d, j, i] = 1.0
        return AffineExpr(self, info.shape, None, {name: tensor})

    def var_dof_vector(self, name, value):
        """Flatten a variable value into its dof vector."""
        info = self.variables[name]
        if info.kind == "scalar":
            return np.array([float(value)])
        value = np.asarray(value, dtype=float)
        return np.array([value[i, j] for i, j in info.entries])

    def var_value(self, name, dof_vec):
        """Inverse of var_dof_vector."""
        info = self.variables[name]
        if info.kind == "scalar":
            return float(dof_vec[0])
        out = np.zeros(info.shape)
        for d, (i, j) in enumerate(info.entries):
            out[i, j] = dof_vec[d]
            if info.kind in ("sym", "diag"):
                out[j, i] = dof_vec[d]
        return out

    # -- constraints and objective ----------------------------------------------

    def _check_symmetric_expr(self, expr, where):
        if expr.shape[0] != expr.shape[1]:
            raise AssemblyError(f"{where}: expression must be square, got {expr.shape}")
        scale = max(1.0, float(np.abs(expr.const).max()))
        if float(np.abs(expr.const - expr.const.T).max()) > 1e-8 * scale:
            raise AssemblyError(f"{where}: constant block is not symmetric")
        for name, tensor in expr.terms.items():
            tscale = max(1.0, float(np.abs(tensor).max()))
            if float(np.abs(tensor - np.swapaxes(tensor, 1, 2)).max()) > 1e-8 * tscale:
                raise AssemblyError(f"{where}: coefficient of {name!r} is not symmetric")

    def _symmetrized(self, expr):
        terms = {k: 0.5 * (v + np.swapaxes(v, 1, 2)) for k, v in expr.terms.items()}
        return AffineExpr(self, expr.shape, 0.5 * (expr.const + expr.const.T), terms)

    def require_nsd(self, expr, strict=False, name=""):
        """expr <= 0 in the PSD order (<= -eta*I when strict)."""
        self._check_symmetric_expr(expr, name or "nsd constraint")
        shift = self.eta if strict else 0.0
        self.constraints.append(
            Constraint(self._symmetrized(expr), "nsd", strict, shift, name)
        )

    def require_psd(self, expr, strict=False, name=""):
        """expr >= 0 in the PSD order (>= eta*I when strict)."""
        self._check_symmetric_expr(expr, name or "psd constraint")
        shift = self.eta if strict else 0.0
        self.constraints.append(
            Constraint(self._symmetrized(expr), "psd", strict, shift, name)
        )

    def require_nonneg(self, expr, name=""):
        """Every entry of expr >= 0 (scalar rows, any shape)."""
        self.constraints.append(Constraint(expr, "nonneg", False, 0.0, name))

    def require_zero(self, expr, name=""):
        """Every entry of expr == 0."""
        self.constraints.append(Constraint(expr, "zero", False, 0.0, name))

    def minimize(self, expr):
        if expr.shape != (1, 1):
            raise AssemblyError("objective must be scalar")
        self.objective = expr
        self.obj_sense = "min"

    def maximize(self, expr):
        if expr.shape != (1, 1):
            raise AssemblyError("objective must be scalar")
        self.objective = expr
        self.obj_sense = "max"

    def clone(self):
        out = LmiProblem(eta=self.eta)
        out.variables = dict(self.variables)
        out.constraints = list(self.constraints)
        out.objective = self.objective
        out.obj_sense = self.obj_sense
        return out
