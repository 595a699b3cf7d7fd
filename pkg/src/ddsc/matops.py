"""Dense symmetric/spectral kernels used by every other module.

All functions take plain ndarrays. Matrices that are symmetric by contract are
symmetrized on entry (and rejected if they are not even close), so downstream
code never has to worry about roundoff asymmetry.
"""

import numpy as np

from .errors import DefinitenessError, StabilityError

__all__ = [
    "symmetrize",
    "sym_eig",
    "is_definite",
    "inv_sqrt_spd",
    "logdet_spd",
    "solve_lyapunov",
    "spectral_norm",
    "is_hurwitz",
]

# Relative eigenvalue threshold for definiteness checks.
DEFAULT_DEFINITENESS_TOL = 1e-9


def _as_square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def symmetrize(m, tol=1e-8):
    """Return (m + m.T)/2, raising if m is asymmetric beyond tol (relative)."""
    m = _as_square(m)
    scale = max(1.0, float(np.abs(m).max()))
    gap = float(np.abs(m - m.T).max())
    if gap > tol * scale:
        raise ValueError(f"matrix is not symmetric: max asymmetry {gap:.3e}")
    return 0.5 * (m + m.T)


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix.

    Returns (w, V) with eigenvalues w ascending and V orthonormal columns
    such that m = V @ diag(w) @ V.T.
    """
    m = symmetrize(m)
    w, v = np.linalg.eigh(m)
    return w, v


def is_definite(m, sense="positive", tol=DEFAULT_DEFINITENESS_TOL):
    """Definiteness test with a relative eigenvalue threshold.

    sense is one of "positive", "negative", "psd", "nsd". The threshold is
    tol * max|eigenvalue|, so the verdict does not change when the matrix
    is scaled by a positive factor.
    """
    w, _ = sym_eig(m)
    scale = float(np.abs(w).max()) if w.size else 0.0
    thr = tol * scale
    if sense == "positive":
        return bool(w.min() > thr)
    if sense == "negative":
        return bool(w.max() < -thr)
    if sense == "psd":
        return bool(w.min() >= -thr)
    if sense == "nsd":
        return bool(w.max() <= thr)
    raise ValueError(f"unknown sense {sense!r}")


def inv_sqrt_spd(m, tol=DEFAULT_DEFINITENESS_TOL):
    """Symmetric inverse square root of an SPD matrix."""
    w, v = sym_eig(m)
    scale = max(1.0, float(np.abs(w).max()) if w.size else 0.0)
    if w.min() <= tol * scale:
        raise DefinitenessError(
            f"matrix is not positive definite (min eig {w.min():.3e})"
        )
    return (v * (1.0 / np.sqrt(w))) @ v.T


def logdet_spd(m, tol=DEFAULT_DEFINITENESS_TOL):
    """log(det(m)) for SPD m, computed from eigenvalues for accuracy."""
    w, _ = sym_eig(m)
    scale = max(1.0, float(np.abs(w).max()) if w.size else 0.0)
    if w.min() <= tol * scale:
        raise DefinitenessError(
            f"matrix is not positive definite (min eig {w.min():.3e})"
        )
    return float(np.sum(np.log(w)))


def spectral_norm(m):
    """Largest singular value."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def is_hurwitz(a, margin=0.0):
    """True iff every eigenvalue of a has real part < -margin."""
    a = _as_square(a, "a")
    return bool(np.max(np.linalg.eigvals(a).real) < -margin)


def solve_lyapunov(a, q):
    """Solve a.T P + P a + q = 0 for symmetric P, with a Hurwitz.

    Dense Kronecker-vectorized solve: (I (x) a.T + a.T (x) I) vec(P) = -vec(q).
    Orders here are small (<= a few tens), so the n^2-unknown dense route is
    simpler and plenty fast.
    """
    a = _as_square(a, "a")
    q = symmetrize(q)
    if q.shape != a.shape:
        raise ValueError(f"q shape {q.shape} does not match a shape {a.shape}")
    if not is_hurwitz(a):
        raise StabilityError("a is not Hurwitz; the Lyapunov equation has no PSD solution")
    n = a.shape[0]
    eye = np.eye(n)
    lhs = np.kron(eye, a.T) + np.kron(a.T, eye)
    p = np.linalg.solve(lhs, -q.reshape(-1))
    return 0.5 * (p.reshape(n, n) + p.reshape(n, n).T)
