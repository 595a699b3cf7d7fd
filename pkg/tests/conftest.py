import types

import numpy as np
import pytest

from ddsc import synthesis
from ddsc.lti import CollectConfig, SparsityPattern, make_mass_spring, simulate_collect
from ddsc.uncertainty import fit_min_ellipsoid, point_ellipsoid


@pytest.fixture(scope="session")
def bench():
    """Two-mass benchmark plant plus the performance channels used throughout."""
    sys = make_mass_spring(2)
    return types.SimpleNamespace(
        sys=sys,
        C=np.vstack([np.eye(4), np.zeros((2, 4))]),
        D=np.vstack([np.zeros((4, 2)), np.eye(2)]),
        H=np.vstack([np.zeros((4, 2)), np.eye(2)]),
        patterns={
            "stabilize": SparsityPattern(np.array([[0, 1, 1, 0], [0, 1, 1, 0]])),
            "h2": SparsityPattern(np.array([[1, 1, 0, 0], [0, 0, 1, 1]])),
            "hinf": SparsityPattern(np.array([[0, 0, 1, 1], [1, 0, 0, 0]])),
        },
    )


@pytest.fixture(scope="session")
def fit_cache(bench):
    """Memoized (DataSet, ellipsoid) pairs keyed by (T, eps, seed).

    The log-det fits dominate suite runtime, and several test modules plus the
    acceptance sweep hit the same cells, so they are computed once per session.
    """
    cache = {}

    def get(T=100, eps=0.01, seed=1):
        key = (int(T), float(eps), int(seed))
        if key not in cache:
            data = simulate_collect(bench.sys, CollectConfig(T=key[0], eps=key[1], seed=key[2]))
            cache[key] = (data, fit_min_ellipsoid(data, bench.sys.G))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def point_ell(bench):
    return point_ellipsoid(bench.sys.A, bench.sys.B)


@pytest.fixture(scope="session")
def model_runs(bench, point_ell):
    """Memoized structured synthesis on the model-backed point ellipsoid.

    These iterative runs are the slowest single calls in the suite and are
    audited from several modules, so each mode runs at most once per session.
    """
    cache = {}

    def get(mode):
        if mode not in cache:
            pat = bench.patterns[mode]
            if mode == "h2":
                cache[mode] = synthesis.h2_structured(
                    point_ell, bench.C, bench.D, bench.sys.G, pat
                )
            elif mode == "hinf":
                cache[mode] = synthesis.hinf_structured(
                    point_ell, bench.C, bench.D, bench.sys.G, bench.H, pat
                )
            else:
                cache[mode] = synthesis.stabilize_structured(point_ell, pat)
        return cache[mode]

    return get
