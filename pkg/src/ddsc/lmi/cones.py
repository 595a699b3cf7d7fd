"""Symmetric vectorization and cone layout shared by the assembler and solver."""

from functools import lru_cache

import numpy as np

__all__ = ["svec_len", "svec", "smat", "svec_batch", "ConeLayout"]

_SQRT2 = np.sqrt(2.0)


@lru_cache(maxsize=None)
def _triu(order):
    rows, cols = np.triu_indices(order)
    weights = np.where(rows == cols, 1.0, _SQRT2)
    return rows, cols, weights


def svec_len(order):
    return order * (order + 1) // 2


def svec(m):
    """Scaled upper-triangle vectorization; preserves inner products."""
    order = m.shape[0]
    rows, cols, weights = _triu(order)
    return m[rows, cols] * weights


def svec_batch(ms):
    """svec applied along the last two axes of a stack of matrices."""
    order = ms.shape[-1]
    rows, cols, weights = _triu(order)
    return ms[..., rows, cols] * weights


def smat(v, order):
    """Inverse of svec."""
    rows, cols, weights = _triu(order)
    out = np.zeros((order, order))
    vals = v / weights
    out[rows, cols] = vals
    out[cols, rows] = vals
    return out


class ConeLayout:
    """Offsets for a product cone: a nonnegative orthant then PSD blocks."""

    def __init__(self, lp_dim, psd_orders):
        self.lp_dim = int(lp_dim)
        self.psd_orders = list(psd_orders)
        self.psd_lens = [svec_len(p) for p in self.psd_orders]
        offs = [self.lp_dim]
        for ln in self.psd_lens:
            offs.append(offs[-1] + ln)
        self.psd_offsets = offs[:-1]
        self.dim = offs[-1]
        # barrier degree: one per LP row, order per PSD block
        self.degree = self.lp_dim + sum(self.psd_orders)

    def lp_part(self, v):
        return v[: self.lp_dim]

    def psd_part(self, v, b):
        off = self.psd_offsets[b]
        return v[off : off + self.psd_lens[b]]

    def identity(self):
        e = np.zeros(self.dim)
        e[: self.lp_dim] = 1.0
        for b, order in enumerate(self.psd_orders):
            e[self.psd_offsets[b] : self.psd_offsets[b] + self.psd_lens[b]] = svec(
                np.eye(order)
            )
        return e
