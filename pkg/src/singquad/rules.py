"""Punctured, corrected and composite corrected trapezoidal rules."""

from __future__ import annotations

import math

import numpy as np

from singquad.core import (
    GridContext,
    IncompatibleWeightsError,
    InsufficientExpansionError,
    SingularKernel,
    SmoothFactor,
)
from singquad.lattice import punctured_trapezoid


def _singular_integrand(kernel: SingularKernel, v: SmoothFactor, x0):
    def f(y):
        return kernel(y - x0) * v(y)
    return f


def punctured_rule(kernel: SingularKernel, v: SmoothFactor, grid: GridContext,
                   workers: int = 1) -> float:
    """``T_h^0`` applied to ``s(x - x0) v(x)``."""
    return punctured_trapezoid(_singular_integrand(kernel, v, grid.x0), v.support_radius,
                               grid, workers=workers)


def _correction(ws, v: SmoothFactor, grid: GridContext) -> float:
    nodes = grid.h * (np.asarray(grid.m, dtype=float) + ws.stencil.as_array())
    return math.fsum((np.asarray(ws.omega) * v(nodes)).tolist())


def corrected_rule(kernel: SingularKernel, v: SmoothFactor, grid: GridContext, weights,
                   workers: int = 1) -> float:
    """Corrected trapezoidal rule of order ``weights.p`` for an r-independent kernel.

    ``T_h^0[f0] + h^(gamma+n) sum_i omega_i v(h (m + c_i))`` with
    ``f0(x) = s0(x - x0) v(x)`` and ``x0 = h (m + alpha)``.
    """
    if not kernel.is_r_independent:
        raise IncompatibleWeightsError(
            "corrected_rule needs an r-independent kernel; use composite_rule")
    weights.check_compatible(kernel, grid.alpha)
    if weights.n != grid.n:
        raise IncompatibleWeightsError(f"weights for n={weights.n}, grid has n={grid.n}")
    base = punctured_rule(kernel, v, grid, workers)
    return base + grid.h ** (kernel.gamma + grid.n) * _correction(weights, v, grid)


def composite_rule(kernel: SingularKernel, v: SmoothFactor, grid: GridContext,
                   weight_provider, p: int, workers: int = 1) -> float:
    """Composite corrected rule of order *p* for a kernel ``|x|^gamma l(|x|, u)``.

    Every expansion term ``|x|^(gamma+k) phi_k(u)`` gets the corrected rule of
    order ``p - k``; the remainder ``f - sum_k terms`` gets the punctured rule.
    *weight_provider* is called as ``weight_provider(term_kernel, order, alpha)``.
    All lattice sums share one pass over the nodes.
    """
    terms = []
    for k in range(p + 1):
        term = kernel.expansion_term(k)
        if term is not None:
            terms.append((k, term))
    if kernel.radial_expansion is not None and len(kernel.radial_expansion) < p + 1:
        raise InsufficientExpansionError(
            f"order {p} needs {p + 1} expansion terms, kernel has {len(kernel.radial_expansion)}")

    weight_sets = []
    for k, term in terms:
        ws = weight_provider(term, p - k, grid.alpha)
        ws.check_compatible(term, grid.alpha)
        if ws.p != p - k:
            raise IncompatibleWeightsError(f"term {k} needs order {p - k}, got {ws.p}")
        weight_sets.append(ws)

    x0 = grid.x0

    def f(y):
        d = y - x0
        r = np.linalg.norm(d, axis=1)
        u = d / r[:, None]
        vy = v(y)
        cols = [r ** term.gamma * term.angular(u) * vy for _, term in terms]
        full = r ** kernel.gamma * kernel.profile(r, u) * vy
        remainder = full
        for c in cols:
            remainder = remainder - c
        return np.stack(cols + [remainder], axis=1)

    sums = np.atleast_1d(punctured_trapezoid(f, v.support_radius, grid, workers=workers))
    total = list(sums)
    for (k, term), ws in zip(terms, weight_sets):
        total.append(grid.h ** (term.gamma + grid.n) * _correction(ws, v, grid))
    return math.fsum(total)
