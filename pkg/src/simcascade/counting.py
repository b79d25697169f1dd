"""Multiply-accumulate counting for the complexity benchmarks.

Counters track the dominant arithmetic of the linear-algebra kernels:
dense matrix products, diagonal scalings, and LU factorizations/solves.
Elementwise exponentials, additions, and copies are not counted.
"""

import numpy as np


class MacCounter:
    """Accumulates multiply-accumulate (MAC) operation counts."""

    __slots__ = ("macs",)

    def __init__(self):
        self.macs = 0

    def add(self, n):
        self.macs += int(n)


def mm(a, b, counter=None):
    """Dense product ``a @ b``, counting m*k*n MACs when a counter is given."""
    if counter is not None:
        n = b.shape[1] if b.ndim == 2 else 1
        counter.add(a.shape[0] * a.shape[1] * n)
    return a @ b


def row_scale(d, m, counter=None):
    """``diag(d) @ m`` with the diagonal stored as a vector."""
    if counter is not None:
        counter.add(d.size * (m.shape[1] if m.ndim == 2 else 1))
    if m.ndim == 2:
        return d[:, np.newaxis] * m
    return d * m


def col_scale(m, d, counter=None):
    """``m @ diag(d)`` with the diagonal stored as a vector."""
    if counter is not None:
        counter.add(m.shape[0] * d.size)
    return m * d[np.newaxis, :]
