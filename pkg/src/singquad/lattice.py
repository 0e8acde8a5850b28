"""Trapezoidal and punctured trapezoidal lattice sums over ``h Z^n``.

Integrands are vectorised (see :mod:`singquad.core`) and may return an
``(N, k)`` array to sum several integrands in one pass over the nodes.

Nodes are visited in slabs along the first axis.  Every slab returns its raw
values and the reduction is an exactly rounded :func:`math.fsum` over all of
them, so the result is bitwise independent of the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from singquad.core import EvaluationError, GridContext, InvalidParametersError

SLAB_TARGET = 1 << 18


def _slabs(radius: float, h: float, n: int):
    # integer boxes covering |y|_inf <= radius + h, split along the first axis
    k = int(math.floor(radius / h)) + 1
    first = np.arange(-k, k + 1)
    per_row = (2 * k + 1) ** (n - 1)
    rows = max(1, SLAB_TARGET // per_row)
    return k, [first[i:i + rows] for i in range(0, len(first), rows)]


def _slab_nodes(rows, k, n):
    if n == 1:
        return rows[:, None]
    rest = np.arange(-k, k + 1)
    grids = np.meshgrid(rows, *([rest] * (n - 1)), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _evaluate_slab(f, rows, k, n, h, radius, excluded):
    idx = _slab_nodes(rows, k, n)
    y = idx * h
    # f vanishes outside the support ball; skip nodes that are surely outside
    keep = np.linalg.norm(y, axis=1) <= radius + h
    if excluded:
        ex = np.zeros(len(idx), dtype=bool)
        for c in excluded:
            ex |= np.all(idx == c, axis=1)
        keep &= ~ex
    y = y[keep]
    if len(y) == 0:
        return None
    vals = np.asarray(f(y), dtype=float)
    if vals.shape[0] != len(y):
        raise InvalidParametersError(
            f"integrand returned {vals.shape[0]} values for {len(y)} points")
    bad = ~np.isfinite(vals)
    if bad.any():
        row = np.flatnonzero(bad.reshape(len(y), -1).any(axis=1))[0]
        raise EvaluationError(y[row], vals[row])
    return vals


def lattice_sum(f, support_radius: float, h: float, n: int, excluded=(), workers: int = 1):
    """``h^n`` times the sum of *f* over ``h Z^n`` minus the integer nodes in *excluded*.

    Returns a float, or a 1-d array when *f* returns an ``(N, k)`` array.
    """
    if not support_radius >= 0:
        raise InvalidParametersError(f"support radius must be >= 0, got {support_radius}")
    excluded = [np.asarray(c, dtype=int).reshape(n) for c in excluded]
    k, slabs = _slabs(support_radius, h, n)

    def work(rows):
        return _evaluate_slab(f, rows, k, n, h, support_radius, excluded)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, slabs))
    else:
        parts = [work(rows) for rows in slabs]
    parts = [p for p in parts if p is not None]

    scale = h ** n
    if not parts:
        return 0.0
    vals = np.concatenate(parts, axis=0)
    if vals.ndim == 1:
        return scale * math.fsum(vals.tolist())
    return np.array([scale * math.fsum(col.tolist()) for col in vals.T])


def trapezoid(f, support_radius: float, grid: GridContext, workers: int = 1):
    """Plain trapezoidal rule ``h^n sum_y f(y)``."""
    return lattice_sum(f, support_radius, grid.h, grid.n, workers=workers)


def punctured_trapezoid(f, support_radius: float, grid: GridContext, workers: int = 1):
    """Trapezoidal rule with the node ``h m`` nearest the singularity left out.

    *f* is never evaluated at the excluded node.
    """
    return lattice_sum(f, support_radius, grid.h, grid.n, excluded=[grid.m], workers=workers)


def stencil_punctured_trapezoid(f, support_radius: float, grid: GridContext, stencil,
                                workers: int = 1):
    """Trapezoidal rule with all nodes ``h (m + c)``, ``c`` in *stencil*, left out."""
    points = [tuple(int(x) for x in np.atleast_1d(c)) for c in stencil]
    if (0,) * grid.n not in points:
        raise InvalidParametersError("stencil must contain the origin")
    m = np.asarray(grid.m, dtype=int)
    excluded = [m + np.asarray(c, dtype=int) for c in points]
    return lattice_sum(f, support_radius, grid.h, grid.n, excluded=excluded, workers=workers)
