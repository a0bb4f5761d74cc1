"""Brute-force performance grids and their discrete local minima."""

from __future__ import annotations

import numpy as np

from .model import T_RANGE, performance
from .params import ReactorParams


def performance_grid(params: ReactorParams, n: int = 121, split="economic", lo=T_RANGE[0], hi=T_RANGE[1]):
    """Cost on an ``n x n`` grid.

    Returns
    -------
    T : ndarray, shape (n,)
        Grid temperatures, shared by both axes.
    F, F1, F2 : ndarray, shape (n, n)
        Total and per-subsystem costs indexed ``[i, j]`` for ``(T[i], T[j])``.
    """
    T = np.linspace(lo, hi, n)
    A, B = np.meshgrid(T, T, indexing="ij")
    f, f1, f2 = performance(params, A.ravel(), B.ravel(), split=split)
    return T, f.reshape(n, n), f1.reshape(n, n), f2.reshape(n, n)


def grid_minima(F) -> list:
    """Cells strictly below all of their (up to eight) neighbours.

    Returns ``(i, j, value)`` triples sorted by value.
    """
    F = np.asarray(F, dtype=float)
    n1, n2 = F.shape
    P = np.pad(F, 1, constant_values=np.inf)
    ok = np.ones_like(F, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                ok &= F < P[1 + di:1 + di + n1, 1 + dj:1 + dj + n2]
    i, j = np.nonzero(ok)
    order = np.argsort(F[i, j], kind="stable")
    return [(int(i[k]), int(j[k]), float(F[i[k], j[k]])) for k in order]
