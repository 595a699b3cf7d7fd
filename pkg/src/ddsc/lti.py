"""Continuous-time LTI plant container, benchmark builder, and data collection.

The plant is

    dx/dt = A x + B u + G d        y = C x + D u + H d

with d an unknown disturbance, bounded per-sample by ||d|| <= eps. Experiments
apply piecewise-constant inputs and disturbances over a fixed sampling period
and record (x_i, u_i, dx_i) triples, where dx_i is the state derivative at the
sample instant (evaluated exactly from the right-hand side, since x, u, d are
all known there).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, StabilityError

__all__ = [
    "LtiSystem",
    "SparsityPattern",
    "DataSet",
    "CollectConfig",
    "make_mass_spring",
    "closed_loop",
    "transfer_matrix",
    "simulate_collect",
]

# Trajectories beyond this magnitude abort collection: the plant/horizon
# combination is numerically hopeless and the caller should rescale.
DIVERGENCE_LIMIT = 1e9


def _mat(m, name, shape=None):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    if shape is not None and m.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {m.shape}")
    return m


@dataclass(frozen=True)
class LtiSystem:
    """State-space data (A, B, G, C, D, H) with consistent dimensions."""

    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    C: np.ndarray
    D: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        a = _mat(self.A, "A")
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError(f"A must be square, got {a.shape}")
        b = _mat(self.B, "B")
        if b.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {b.shape}")
        g = _mat(self.G, "G")
        if g.shape[0] != n:
            raise ValueError(f"G must have {n} rows, got {g.shape}")
        c = _mat(self.C, "C")
        if c.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {c.shape}")
        d = _mat(self.D, "D", (c.shape[0], b.shape[1]))
        h = _mat(self.H, "H", (c.shape[0], g.shape[1]))
        for name, val in (("A", a), ("B", b), ("G", g), ("C", c), ("D", d), ("H", h)):
            object.__setattr__(self, name, val)

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_dist(self):
        return self.G.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class SparsityPattern:
    """Binary mask of permitted gain entries (1 = free, 0 = forced zero)."""

    free: np.ndarray

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.free))
        if not np.isin(f, (0, 1)).all():
            raise ValueError("pattern entries must be 0 or 1")
        object.__setattr__(self, "free", f.astype(int))

    @property
    def forced_zero(self):
        """Complementary mask (1 where the gain entry must vanish)."""
        return 1 - self.free

    @property
    def shape(self):
        return self.free.shape

    def project(self, k):
        """Zero out the forced entries of a gain."""
        k = np.asarray(k, dtype=float)
        if k.shape != self.free.shape:
            raise ValueError(f"gain shape {k.shape} does not match pattern {self.free.shape}")
        return k * self.free

    def residual(self, k):
        """Frobenius norm of the forced-zero entries of k."""
        k = np.asarray(k, dtype=float)
        if k.shape != self.free.shape:
            raise ValueError(f"gain shape {k.shape} does not match pattern {self.free.shape}")
        return float(np.linalg.norm(k * self.forced_zero, "fro"))


@dataclass(frozen=True)
class DataSet:
    """One recorded experiment: states, inputs, derivatives, and metadata.

    X0, U0, X1 have one column per sample; X1 holds the state derivative at
    each sample instant. D0 is the ground-truth disturbance, carried along for
    testing only (a consumer of recorded data would not have it).
    """

    X0: np.ndarray
    U0: np.ndarray
    X1: np.ndarray
    Ts: float
    eps: float
    seed: int
    D0: np.ndarray | None = None

    def __post_init__(self):
        x0 = _mat(self.X0, "X0")
        u0 = _mat(self.U0, "U0")
        x1 = _mat(self.X1, "X1", x0.shape)
        t = x0.shape[1]
        if u0.shape[1] != t:
            raise ValueError(f"U0 has {u0.shape[1]} columns, expected {t}")
        if self.Ts <= 0:
            raise ValueError("Ts must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        object.__setattr__(self, "X0", x0)
        object.__setattr__(self, "U0", u0)
        object.__setattr__(self, "X1", x1)
        if self.D0 is not None:
            d0 = _mat(self.D0, "D0")
            if d0.shape[1] != t:
                raise ValueError(f"D0 has {d0.shape[1]} columns, expected {t}")
            norms = np.linalg.norm(d0, axis=0)
            if norms.size and norms.max() > self.eps * (1 + 1e-12) + 1e-300:
                raise ValueError("D0 column norms exceed the declared eps bound")
            object.__setattr__(self, "D0", d0)

    @property
    def n_samples(self):
        return self.X0.shape[1]

    def regressors(self):
        """Stacked [x; u] samples, one column per sample."""
        return np.vstack([self.X0, self.U0])


@dataclass(frozen=True)
class CollectConfig:
    """Experiment design: horizon, sampling, excitation, and noise level."""

    T: int
    Ts: float = 0.1
    eps: float = 0.01
    seed: int = 1
    amplitude: float = 1.0
    x0_scale: float = 1.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.Ts <= 0:
            raise ValueError("Ts must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.x0_scale < 0:
            raise ValueError("x0_scale must be nonnegative")


def make_mass_spring(n_masses=2):
    """Chain of unit masses coupled by unit springs, force inputs on each mass.

    States are [positions; velocities]; the disturbance enters like the input.
    The A matrix is marginally stable (purely imaginary eigenvalues), so any
    useful feedback design has to add damping.
    """
    if n_masses < 1:
        raise ValueError("need at least one mass")
    n = int(n_masses)
    t = -2.0 * np.eye(n) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    a = np.block([[np.zeros((n, n)), np.eye(n)], [t, np.zeros((n, n))]])
    b = np.vstack([np.zeros((n, n)), np.eye(n)])
    # Default channels: identity observation of the full state, no feedthrough.
    c = np.eye(2 * n)
    d = np.zeros((2 * n, n))
    h = np.zeros((2 * n, n))
    return LtiSystem(A=a, B=b, G=b.copy(), C=c, D=d, H=h)


def closed_loop(sys, k):
    """Closed-loop matrices (A + B K, C + D K) under state feedback u = K x."""
    k = _mat(k, "K", (sys.n_inputs, sys.n_states))
    return sys.A + sys.B @ k, sys.C + sys.D @ k


def transfer_matrix(a_cl, g, c_cl, h, omega):
    """Disturbance-to-output frequency response C (jwI - A)^{-1} G + H."""
    n = a_cl.shape[0]
    m = 1j * float(omega) * np.eye(n) - a_cl
    # a pole on the axis leaves solve "succeeding" with garbage values, so
    # gate on conditioning rather than on LinAlgError alone
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise StabilityError(f"resolvent is singular at omega={omega}")
    sol = np.linalg.solve(m, g)
    return c_cl @ sol + h


def _rk4_interval(a, rhs_const, x, dt, steps):
    """Integrate dx/dt = a x + rhs_const over one hold interval."""
    for _ in range(steps):
        k1 = a @ x + rhs_const
        k2 = a @ (x + 0.5 * dt * k1) + rhs_const
        k3 = a @ (x + 0.5 * dt * k2) + rhs_const
        k4 = a @ (x + dt * k3) + rhs_const
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def simulate_collect(sys, cfg, substeps=100):
    """Run one excitation experiment and return the recorded DataSet.

    Inputs are redrawn uniformly from [-amplitude, amplitude] for every hold
    interval; the disturbance direction is uniform on the sphere with radius
    eps * U[0,1). Both are held constant over each interval, and integration
    uses fixed-step RK4 with `substeps` steps per interval. Derivative samples
    come straight from the model right-hand side, so they are exact up to the
    integrator's state error.
    """
    rng = np.random.default_rng(cfg.seed)
    n, nu, nd = sys.n_states, sys.n_inputs, sys.n_dist
    x = cfg.x0_scale * rng.standard_normal(n)
    dt = cfg.Ts / substeps

    x0 = np.empty((n, cfg.T))
    u0 = np.empty((nu, cfg.T))
    x1 = np.empty((n, cfg.T))
    d0 = np.empty((nd, cfg.T))

    for i in range(cfg.T):
        u = rng.uniform(-cfg.amplitude, cfg.amplitude, size=nu)
        direction = rng.standard_normal(nd)
        direction /= np.linalg.norm(direction)
        d = cfg.eps * rng.uniform() * direction
        nrm = np.linalg.norm(d)
        if nrm > cfg.eps > 0:
            d *= cfg.eps / nrm

        x0[:, i] = x
        u0[:, i] = u
        d0[:, i] = d
        x1[:, i] = sys.A @ x + sys.B @ u + sys.G @ d

        x = _rk4_interval(sys.A, sys.B @ u + sys.G @ d, x, dt, substeps)
        if np.abs(x).max() > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"trajectory exceeded {DIVERGENCE_LIMIT:g} at sample {i}; "
                "shorten the horizon or rescale the plant"
            )

    return DataSet(X0=x0, U0=u0, X1=x1, Ts=cfg.Ts, eps=cfg.eps, seed=cfg.seed, D0=d0)
