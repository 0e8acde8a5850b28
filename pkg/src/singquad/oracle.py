"""Brute-force reference integrals and observed convergence orders.

The reference integrator works in polar coordinates about the singularity and
shares no code with the lattice or moment routines: radial panels are graded
geometrically toward ``r = 0``, the innermost panel absorbs ``r^e`` through
Gauss-Jacobi nodes, the rest use Gauss-Legendre with adaptive bisection, and
the angular resolution is doubled until it settles.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from singquad.core import InvalidParametersError, NoConvergenceError


@dataclass(frozen=True)
class ReferenceValue:
    value: float
    error_estimate: float
    angular_resolution: int
    radial_panels: int

    def __float__(self):
        return self.value


@lru_cache(maxsize=16)
def _legendre(q):
    return np.polynomial.legendre.leggauss(q)


@lru_cache(maxsize=64)
def _jacobi(q, e):
    return roots_jacobi(q, 0.0, e)


def _directions(n, level):
    """Unit vectors and weights on ``S^(n-1)`` at refinement *level*."""
    if n == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if n == 2:
        k = 8 * 2 ** level
        t = 2 * np.pi * (np.arange(k) + 0.5) / k
        return np.stack([np.cos(t), np.sin(t)], axis=1), np.full(k, 2 * np.pi / k)
    k = 4 * 2 ** level
    z, wz = _legendre(k)
    phi = 2 * np.pi * (np.arange(2 * k) + 0.5) / (2 * k)
    Z, P = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1 - Z ** 2)
    u = np.stack([(s * np.cos(P)).ravel(), (s * np.sin(P)).ravel(), Z.ravel()], axis=1)
    return u, np.repeat(wz, 2 * k) * (np.pi / k)


class _Radial:
    """Integrals ``int_0^R r^e l(r, u) v(x0 + r u) dr`` for a batch of directions."""

    def __init__(self, kernel, v, x0, dirs, dir_weights, R, gl_order):
        self.kernel, self.v, self.x0 = kernel, v, x0
        self.dirs, self.dw, self.R = dirs, dir_weights, R
        self.e = kernel.gamma + kernel.n - 1
        self.q = gl_order

    def _smooth(self, r):
        # l(r, u) v(x0 + r u) on the (directions x radii) product, shape (D, Q)
        D, n = self.dirs.shape
        rr = np.broadcast_to(r, (D, len(r)))
        uu = np.broadcast_to(self.dirs[:, None, :], (D, len(r), n))
        pts = self.x0 + rr[..., None] * uu
        prof = self.kernel.profile(rr.reshape(-1), uu.reshape(-1, n))
        return (prof * self.v(pts.reshape(-1, n))).reshape(D, len(r))

    def gl(self, a, b):
        x, w = _legendre(self.q)
        r = 0.5 * (a + b) + 0.5 * (b - a) * x
        return 0.5 * (b - a) * (self._smooth(r) * r ** self.e) @ w

    def jacobi(self, delta, q):
        x, w = _jacobi(q, self.e)
        r = 0.5 * delta * (1 + x)
        return (0.5 * delta) ** (self.e + 1) * (self._smooth(r) @ w)

    def weighted(self, vals):
        return float(np.dot(self.dw, np.abs(vals)))

    def integrate(self, tol, levels, max_panels):
        delta = self.R * 2.0 ** -levels
        inner = self.jacobi(delta, self.q)
        inner_err = self.weighted(inner - self.jacobi(delta, self.q // 2 + 2))

        heap = []
        total_err = inner_err
        edges = [self.R * 2.0 ** -k for k in range(levels, -1, -1)]
        accepted = [inner]

        def push(a, b, whole):
            nonlocal total_err
            m = 0.5 * (a + b)
            left, right = self.gl(a, m), self.gl(m, b)
            err = self.weighted(whole - left - right)
            total_err += err
            heapq.heappush(heap, (-err, a, b, left, right))

        for a, b in zip(edges[:-1], edges[1:]):
            push(a, b, self.gl(a, b))
        panels = len(heap) + 1
        while heap and total_err > tol and panels < max_panels:
            neg, a, b, left, right = heapq.heappop(heap)
            total_err += neg
            m = 0.5 * (a + b)
            push(a, m, left)
            push(m, b, right)
            panels += 1
        for _, _, _, left, right in heap:
            accepted.append(left + right)
        return np.sum(accepted, axis=0), total_err, panels


def reference_integral(kernel, v, x0, tol: float = 1e-12, *, gl_order: int = 24,
                       geometric_levels: int = 12, max_panels: int = 60,
                       max_level: int = 9) -> ReferenceValue:
    """``int |x - x0|^gamma l(|x - x0|, u) v(x) dx`` by adaptive polar integration.

    Raises
    ------
    NoConvergenceError
        If the angular refinement or the radial panel budget is exhausted before
        the estimated error drops below *tol*; ``best`` holds the last value.
    """
    n = kernel.n
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (n,):
        raise InvalidParametersError(f"x0 must have {n} components")
    R = v.support_radius + float(np.linalg.norm(x0))
    if R == 0:
        return ReferenceValue(0.0, 0.0, 0, 0)

    prev = None
    gap = math.inf
    settled = False
    for level in range(max_level + 1):
        dirs, dw = _directions(n, level)
        radial = _Radial(kernel, v, x0, dirs, dw, R, gl_order)
        vals, rad_err, panels = radial.integrate(0.25 * tol, geometric_levels, max_panels)
        value = math.fsum((dw * vals).tolist())
        if rad_err > tol:
            raise NoConvergenceError(
                f"radial panels exhausted (error {rad_err:.2e} > {tol:.1e})",
                best=value, gap=rad_err)
        if n == 1:
            return ReferenceValue(value, rad_err, 2, panels)
        if prev is not None:
            gap = abs(value - prev)
            # two consecutive settled doublings guard against aliasing
            if gap < tol and settled:
                return ReferenceValue(value, gap + rad_err, len(dw), panels)
            settled = gap < tol
        prev = value
    raise NoConvergenceError(
        f"angular refinement did not settle (gap {gap:.2e} > {tol:.1e})", best=prev, gap=gap)


def estimate_order(errors) -> list[float | None]:
    """Observed orders ``log(e_j / e_j+1) / log(h_j / h_j+1)`` for consecutive pairs.

    Pairs with a zero or non-finite error give ``None``.
    """
    errors = [(float(h), float(e)) for h, e in errors]
    if len(errors) < 2:
        raise InvalidParametersError("need at least two (h, error) pairs")
    if any(b[0] >= a[0] for a, b in zip(errors, errors[1:])):
        raise InvalidParametersError("h must be strictly decreasing")
    out = []
    for (h1, e1), (h2, e2) in zip(errors, errors[1:]):
        e1, e2 = abs(e1), abs(e2)
        if not (e1 > 0 and e2 > 0 and math.isfinite(e1) and math.isfinite(e2)):
            out.append(None)
            continue
        out.append(math.log(e1 / e2) / math.log(h1 / h2))
    return out
