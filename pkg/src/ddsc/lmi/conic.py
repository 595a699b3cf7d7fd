"""Homogeneous self-dual interior-point method for symmetric cone programs.

Solves  min g'y  s.t.  G y + s = h,  s in K,  where K is a product of a
nonnegative orthant and dense PSD blocks (svec coordinates). The homogeneous
embedding delivers either an optimal point or a certificate of infeasibility
or unboundedness from the same iterate stream, so callers never have to guess
from a failed solve. Search directions use Nesterov-Todd scaling with a
Mehrotra predictor-corrector, reduced to normal equations on the dof space.
"""

from dataclasses import dataclass, field

import numpy as np

from .cones import ConeLayout, smat, svec

__all__ = ["ConicResult", "solve_conic"]

_STALL_STEP = 1e-9
_SQRT2 = np.sqrt(2.0)


@dataclass
class ConicResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "max-iterations"
    y: np.ndarray
    x: np.ndarray
    s: np.ndarray
    tau: float
    kappa: float
    iterations: int
    metrics: dict = field(default_factory=dict)


def _equilibrate(G, h, layout, sweeps=3):
    """Ruiz-style scaling: uniform per cone block on rows, per dof on columns.

    Scaling a PSD block by one positive factor keeps it a PSD constraint;
    per-row scaling inside an svec block would not.
    """
    dim, m = G.shape
    Gs = G.copy()
    hs = h.copy()
    row = np.ones(dim)
    col = np.ones(m)

    blocks = [(i, i + 1) for i in range(layout.lp_dim)]
    for b in range(len(layout.psd_orders)):
        off = layout.psd_offsets[b]
        blocks.append((off, off + layout.psd_lens[b]))

    for _ in range(sweeps):
        for lo, hi in blocks:
            mx = max(
                np.abs(Gs[lo:hi]).max(initial=0.0),
                np.abs(hs[lo:hi]).max(initial=0.0),
            )
            if mx <= 1e-12:
                continue
            f = 1.0 / np.sqrt(mx)
            Gs[lo:hi] *= f
            hs[lo:hi] *= f
            row[lo:hi] *= f
        cmax = np.abs(Gs).max(axis=0)
        cf = np.where(cmax > 1e-12, 1.0 / np.sqrt(cmax), 1.0)
        Gs *= cf
        col *= cf
    return Gs, hs, row, col


def _chol_jitter(M, base_reg):
    reg = 0.0
    for _ in range(6):
        try:
            return np.linalg.cholesky(M + reg * np.eye(M.shape[0]) if reg else M)
        except np.linalg.LinAlgError:
            reg = base_reg if reg == 0.0 else reg * 100.0
    raise np.linalg.LinAlgError("factorization failed")


def _chol_solve(chol, rhs):
    z = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, z)


class _Scaling:
    """Nesterov-Todd scaling state for one iterate."""

    def __init__(self, layout, x, s):
        L = layout.lp_dim
        self.w_lp = np.sqrt(x[:L] / s[:L]) if L else np.zeros(0)
        self.lam_lp = np.sqrt(x[:L] * s[:L]) if L else np.zeros(0)
        self.R = []
        self.Rinv = []
        self.lam = []
        for b, order in enumerate(layout.psd_orders):
            X = smat(layout.psd_part(x, b), order)
            S = smat(layout.psd_part(s, b), order)
            tr = max(np.trace(X) / order, np.trace(S) / order, 1.0)
            L1 = _chol_jitter(X, 1e-14 * tr)
            L2 = _chol_jitter(S, 1e-14 * tr)
            U, sig, Vt = np.linalg.svd(L2.T @ L1)
            isq = 1.0 / np.sqrt(sig)
            self.R.append(L1 @ Vt.T * isq)
            self.Rinv.append((U * isq).T @ L2.T)
            self.lam.append(sig)


def _eig_floor(M):
    """Smallest eigenvalue, with numerical breakdown reported as -inf."""
    if not np.isfinite(M).all():
        return -np.inf
    try:
        return float(np.linalg.eigvalsh(M)[0])
    except np.linalg.LinAlgError:
        return -np.inf


def _cone_project(v, layout):
    """Euclidean projection onto the cone, in svec coordinates."""
    out = v.copy()
    if layout.lp_dim:
        out[: layout.lp_dim] = np.maximum(out[: layout.lp_dim], 0.0)
    for b, order in enumerate(layout.psd_orders):
        off = layout.psd_offsets[b]
        w, V = np.linalg.eigh(smat(layout.psd_part(out, b), order))
        if w[0] < 0.0:
            out[off : off + layout.psd_lens[b]] = svec((V * np.maximum(w, 0.0)) @ V.T)
    return out


def _polish_ray(Gs, hs, x0, layout, feastol):
    """Alternating projection of a collapsed iterate onto null(G') ∩ K.

    A margin-thin infeasible instance leaves the interior-point iterate with a
    Farkas direction polluted by O(mu) noise that the Newton steps can no
    longer remove. Projecting between the null space and the cone cleans the
    residual; the result is only used if it passes the same strict certificate
    test applied to in-loop rays, so a feasible problem cannot be mislabeled.
    """
    nrm = np.linalg.norm(x0)
    if not np.isfinite(nrm) or nrm <= 0.0:
        return None
    U, sig, _ = np.linalg.svd(Gs, full_matrices=False)
    if sig.size:
        rank = int(np.sum(sig > sig[0] * max(Gs.shape) * np.finfo(float).eps))
        U = U[:, :rank]
    scale_h = max(1.0, np.linalg.norm(hs))
    x = x0 / nrm
    for _ in range(60):
        x = x - U @ (U.T @ x)
        x = _cone_project(x, layout)
        nrm = np.linalg.norm(x)
        if nrm <= 1e-12:
            return None
        x = x / nrm
        hx = hs @ x
        if hx < 0.0 and np.linalg.norm(Gs.T @ x) * scale_h / (-hx) <= feastol:
            return x
    return None


def _max_step(layout, sc, dx, ds):
    """Largest step keeping x and s inside the cone, in scaled coordinates."""
    alpha = np.inf
    L = layout.lp_dim
    if L:
        dxs = dx[:L] / sc.w_lp
        neg = dxs < 0
        if neg.any():
            alpha = min(alpha, np.min(-sc.lam_lp[neg] / dxs[neg]))
        dss = ds[:L] * sc.w_lp
        neg = dss < 0
        if neg.any():
            alpha = min(alpha, np.min(-sc.lam_lp[neg] / dss[neg]))
    for b, order in enumerate(layout.psd_orders):
        denom = np.sqrt(np.outer(sc.lam[b], sc.lam[b]))
        Dx = sc.Rinv[b] @ smat(layout.psd_part(dx, b), order) @ sc.Rinv[b].T
        emin = _eig_floor(Dx / denom)
        if emin < 0:
            alpha = min(alpha, 1.0 / -emin)
        Ds = sc.R[b].T @ smat(layout.psd_part(ds, b), order) @ sc.R[b]
        emin = _eig_floor(Ds / denom)
        if emin < 0:
            alpha = min(alpha, 1.0 / -emin)
    return alpha


def _finite_dir(dy, dx, ds, dtau, dkap):
    """Newton breakdown check: any non-finite entry means the factor is junk."""
    return (
        np.isfinite(dtau)
        and np.isfinite(dkap)
        and np.isfinite(dx).all()
        and np.isfinite(ds).all()
        and np.isfinite(dy).all()
    )


def solve_conic(G, h, g, layout, feastol=1e-8, gaptol=1e-8, maxiter=200):
    """Run the embedded interior-point method on one cone program."""
    G = np.ascontiguousarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    dim, m = G.shape
    if dim != layout.dim:
        raise ValueError("cone layout does not match G")

    Gs, hs, row_scale, col_scale = _equilibrate(G, h, layout)
    gs = g * col_scale

    L = layout.lp_dim
    G_lp = Gs[:L]
    # compact per-block column tensors: only dofs that touch the block
    block_data = []
    for b, order in enumerate(layout.psd_orders):
        off = layout.psd_offsets[b]
        sl = Gs[off : off + layout.psd_lens[b]]
        active = np.flatnonzero(np.abs(sl).max(axis=0) > 0.0)
        if active.size:
            tensor = np.stack([smat(sl[:, j], order) for j in active], axis=0)
        else:
            tensor = np.zeros((0, order, order))
        block_data.append((off, order, active, tensor))

    e = layout.identity()
    x = e.copy()
    s = e.copy()
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0
    nu = layout.degree + 1.0
    norm_h = np.linalg.norm(hs)
    norm_g = np.linalg.norm(gs)

    def classify_ray():
        """Pick the better Farkas certificate out of a collapsed iterate."""
        hx = hs @ x
        q_inf = np.inf
        if hx < -1e-12 * max(1.0, np.linalg.norm(x)):
            q_inf = np.linalg.norm(Gs.T @ x) * max(1.0, norm_h) / (-hx)
        gy = gs @ y
        q_unb = np.inf
        if gy < -1e-12 * max(1.0, np.linalg.norm(y)):
            q_unb = np.linalg.norm(Gs @ y + s) * max(1.0, norm_g) / (-gy)
        if min(q_inf, q_unb) > 1e-6:
            return None
        if q_inf <= q_unb:
            return ("infeasible", y, x / (-hx), s)
        return ("unbounded", y / (-gy), x, s / (-gy))

    def hinv_apply(sc, v):
        """H^{-1} v with H the NT quadratic representation: v -> W mat(v) W."""
        out = np.empty_like(v)
        if L:
            out[:L] = v[:L] * sc.w_lp**2
        for b, order in enumerate(layout.psd_orders):
            off = layout.psd_offsets[b]
            W = sc.R[b] @ sc.R[b].T
            out[off : off + layout.psd_lens[b]] = svec(
                W @ smat(layout.psd_part(v, b), order) @ W
            )
        return out

    def factor(sc):
        """Scaled block rows and the Cholesky factor of M = G' H^{-1} G."""
        M = np.zeros((m, m))
        if L:
            M += (G_lp * sc.w_lp[:, None] ** 2).T @ G_lp
        vrows = []
        for b, (off, order, active, tensor) in enumerate(block_data):
            if not active.size:
                vrows.append(None)
                continue
            R = sc.R[b]
            scaled = np.matmul(R.T, np.matmul(tensor, R))
            rows, cols = np.triu_indices(order)
            wts = np.where(rows == cols, 1.0, _SQRT2)
            V = scaled[:, rows, cols] * wts
            vrows.append(V)
            M[np.ix_(active, active)] += V @ V.T
        base = 1e-13 * max(np.trace(M) / max(m, 1), 1.0)
        return _chol_jitter(M, base), vrows

    def gt_hinv(sc, vrows, v):
        """G' H^{-1} v without forming H^{-1} G."""
        out = np.zeros(m)
        if L:
            out += G_lp.T @ (v[:L] * sc.w_lp**2)
        for b, (off, order, active, tensor) in enumerate(block_data):
            if not active.size:
                continue
            R = sc.R[b]
            sv = svec(R.T @ smat(layout.psd_part(v, b), order) @ R)
            out[active] += vrows[b] @ sv
        return out

    best = None
    stalled = 0
    it = 0
    metrics = {}
    for it in range(1, maxiter + 1):
        rp = Gs.T @ x + gs * tau
        rd = Gs @ y + s - hs * tau
        rg = kappa + gs @ y + hs @ x
        mu = (x @ s + tau * kappa) / nu

        yh = y / tau
        xh = x / tau
        sh = s / tau
        pres = np.linalg.norm(Gs @ yh + sh - hs) / (1.0 + norm_h)
        dres = np.linalg.norm(Gs.T @ xh + gs) / (1.0 + norm_g)
        pobj = gs @ yh
        dobj = -hs @ xh
        gap = (x @ s) / max(tau * tau, 1e-300)
        relgap = gap / max(1.0, abs(pobj), abs(dobj))
        metrics = {
            "pres": pres,
            "dres": dres,
            "relgap": relgap,
            "pobj": pobj,
            "dobj": dobj,
            "mu": mu,
        }

        if pres <= feastol and dres <= feastol and relgap <= gaptol:
            best = ("optimal", yh, xh, sh)
            break

        hx = hs @ x
        if hx < -1e-12 * max(1.0, np.linalg.norm(x)):
            quality = np.linalg.norm(Gs.T @ x) * max(1.0, norm_h) / (-hx)
            if quality <= feastol:
                best = ("infeasible", y, x / (-hx), s)
                break
        gy = gs @ y
        if gy < -1e-12 * max(1.0, np.linalg.norm(y)):
            quality = np.linalg.norm(Gs @ y + s) * max(1.0, norm_g) / (-gy)
            if quality <= feastol:
                best = ("unbounded", y / (-gy), x, s / (-gy))
                break

        # tau collapsing while kappa stays alive means the embedding found a
        # ray, not a point; stop before the scaled iterates overflow
        if kappa > 1e12 * tau:
            break

        sc = _Scaling(layout, x, s)
        chol, vrows = factor(sc)

        rhs2 = gt_hinv(sc, vrows, hs) - gs
        v2 = _chol_solve(chol, rhs2)
        x2 = hinv_apply(sc, Gs @ v2 - hs)
        den = gs @ v2 + hs @ x2 - kappa / tau

        def direction(bp, bd, bg, u, bk):
            f = bd - u
            v1 = _chol_solve(chol, bp + gt_hinv(sc, vrows, f))
            x1 = hinv_apply(sc, Gs @ v1 - f)
            dtau = (bg - gs @ v1 - hs @ x1 - bk / tau) / den
            dy = v1 + dtau * v2
            dx = x1 + dtau * x2
            ds = bd - Gs @ dy + hs * dtau
            dkap = (bk - kappa * dtau) / tau
            return dy, dx, ds, dtau, dkap

        # predictor: aim at zero residuals and zero complementarity
        dy_a, dx_a, ds_a, dtau_a, dkap_a = direction(-rp, -rd, -rg, -s, -tau * kappa)
        if not _finite_dir(dy_a, dx_a, ds_a, dtau_a, dkap_a):
            break
        alpha_a = _max_step(layout, sc, dx_a, ds_a)
        if dtau_a < 0:
            alpha_a = min(alpha_a, tau / -dtau_a)
        if dkap_a < 0:
            alpha_a = min(alpha_a, kappa / -dkap_a)
        alpha_a = min(1.0, 0.99 * alpha_a) if np.isfinite(alpha_a) else 1.0

        mu_aff = (
            (x + alpha_a * dx_a) @ (s + alpha_a * ds_a)
            + (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkap_a)
        ) / nu
        sigma = min(1.0, max(0.0, mu_aff / mu) ** 3)

        # corrector target in scaled coordinates
        u = np.empty_like(s)
        if L:
            dxs = dx_a[:L] / sc.w_lp
            dss = ds_a[:L] * sc.w_lp
            v_lp = sigma * mu - sc.lam_lp**2 - dxs * dss
            u[:L] = v_lp / (sc.lam_lp * sc.w_lp)
        for b, order in enumerate(layout.psd_orders):
            off = layout.psd_offsets[b]
            lam = sc.lam[b]
            Dx = sc.Rinv[b] @ smat(layout.psd_part(dx_a, b), order) @ sc.Rinv[b].T
            Ds = sc.R[b].T @ smat(layout.psd_part(ds_a, b), order) @ sc.R[b]
            V = sigma * mu * np.eye(order) - np.diag(lam**2) - 0.5 * (Dx @ Ds + Ds @ Dx)
            H = 2.0 * V / np.add.outer(lam, lam)
            H = 0.5 * (H + H.T)
            u[off : off + layout.psd_lens[b]] = svec(sc.Rinv[b].T @ H @ sc.Rinv[b])

        lin = 1.0 - sigma
        bk = sigma * mu - tau * kappa - dtau_a * dkap_a
        dy, dx, ds, dtau, dkap = direction(-lin * rp, -lin * rd, -lin * rg, u, bk)
        if not _finite_dir(dy, dx, ds, dtau, dkap):
            break

        alpha = _max_step(layout, sc, dx, ds)
        if dtau < 0:
            alpha = min(alpha, tau / -dtau)
        if dkap < 0:
            alpha = min(alpha, kappa / -dkap)
        alpha = min(1.0, 0.99 * alpha) if np.isfinite(alpha) else 1.0

        if alpha < _STALL_STEP:
            stalled += 1
            if stalled >= 2:
                break
        else:
            stalled = 0

        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        tau += alpha * dtau
        kappa += alpha * dkap

        # the embedding is homogeneous of degree one: any positive multiple is
        # the same iterate, so shrink big ones before the normal equations blow
        scale = max(
            tau,
            kappa,
            np.abs(x).max(initial=0.0),
            np.abs(s).max(initial=0.0),
            np.abs(y).max(initial=0.0),
        )
        if scale > 1e10:
            x /= scale
            y /= scale
            s /= scale
            tau /= scale
            kappa /= scale

    if best is None and kappa > 1e8 * tau:
        best = classify_ray()
        if best is None:
            xr = _polish_ray(Gs, hs, x, layout, feastol)
            if xr is not None:
                best = ("infeasible", y, xr / -(hs @ xr), s)
    if best is None:
        if tau > 1e-9:
            best = ("max-iterations", y / tau, x / tau, s / tau)
        else:
            best = ("max-iterations", y, x, s)

    status, y_out, x_out, s_out = best
    y_user = y_out * col_scale
    x_user = x_out * row_scale
    s_user = s_out / row_scale
    return ConicResult(status, y_user, x_user, s_user, tau, kappa, it, metrics)
