"""Shared domain types, multi-index combinatorics and parameter validation.

Vectorisation convention used throughout the package: every user callable
that takes points receives a float array of shape ``(N, n)`` and returns an
array of shape ``(N,)``.  Angular profiles receive unit vectors in the same
layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from math import comb
from typing import Callable, Sequence

import numpy as np

ArrayFunction = Callable[[np.ndarray], np.ndarray]
RadialFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

MAX_DIMENSION = 3


# {{{ errors


class SingquadError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParametersError(SingquadError, ValueError):
    pass


class EvaluationError(SingquadError):
    """An integrand produced a non-finite value at a lattice node."""

    def __init__(self, node, value):
        self.node = tuple(float(x) for x in np.atleast_1d(node))
        self.value = value
        super().__init__(f"non-finite integrand value {value!r} at node {self.node}")


class NonIntegrableMomentError(SingquadError, ValueError):
    pass


class StencilDegenerateError(SingquadError):
    def __init__(self, message, condition_number=math.inf):
        self.condition_number = condition_number
        super().__init__(message)


class NoConvergenceError(SingquadError):
    """Raised when an iterative procedure exhausts its budget.

    ``best`` holds the best available estimate and ``gap`` the last observed
    difference between successive refinements.
    """

    def __init__(self, message, best=None, gap=None, diagnostics=None):
        self.best = best
        self.gap = gap
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class IncompatibleWeightsError(SingquadError):
    pass


class OutOfRangeError(SingquadError, ValueError):
    pass


class InsufficientExpansionError(SingquadError):
    pass


# }}}


# {{{ multi-indices


class MultiIndex(tuple):
    """Exponent vector ``nu`` in ``N_0^n``, used for monomials and derivatives."""

    def __new__(cls, exponents: Sequence[int]):
        values = tuple(int(e) for e in exponents)
        if any(e < 0 for e in values):
            raise InvalidParametersError(f"negative exponent in {values}")
        return super().__new__(cls, values)

    @property
    def order(self) -> int:
        return sum(self)

    @property
    def factorial(self) -> int:
        return math.prod(math.factorial(e) for e in self)

    def monomial(self, x: np.ndarray) -> np.ndarray:
        """Evaluate ``x**nu`` row-wise for ``x`` of shape ``(N, n)``."""
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for i, e in enumerate(self):
            if e:
                out = out * x[..., i] ** e
        return out


def pi_count(p: int, n: int) -> int:
    """Number of partial derivatives of order at most *p* in *n* variables."""
    if p < 0 or n < 1:
        raise InvalidParametersError(f"need p >= 0 and n >= 1, got p={p}, n={n}")
    return sum(comb(q + n - 1, n - 1) for q in range(p + 1))


def _compositions(total: int, n: int):
    # lexicographic order of the exponent tuples with a fixed total
    if n == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, n - 1):
            yield (first, *rest)


def enumerate_multi_indices(p: int, n: int) -> list[MultiIndex]:
    """All multi-indices with ``|nu| <= p`` in graded lexicographic order."""
    if p < 0 or n < 1:
        raise InvalidParametersError(f"need p >= 0 and n >= 1, got p={p}, n={n}")
    return [MultiIndex(c) for q in range(p + 1) for c in _compositions(q, n)]


# }}}


def split_singularity(x0, h: float) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """Write ``x0 = h * (m + alpha)`` with integer *m* and ``|alpha|_inf <= 1/2``.

    Ties at ``alpha_i = -1/2`` are moved to ``+1/2``.
    """
    if not h > 0:
        raise InvalidParametersError(f"h must be positive, got {h}")
    m, alpha = [], []
    for xi in np.atleast_1d(np.asarray(x0, dtype=float)):
        t = xi / h
        mi = math.floor(t + 0.5)
        ai = t - mi
        if ai <= -0.5:
            mi -= 1
            ai = t - mi
        m.append(int(mi))
        alpha.append(float(ai))
    return tuple(m), tuple(alpha)


# {{{ grid


@dataclass(frozen=True)
class GridContext:
    """Uniform grid ``h Z^n`` with a singularity at ``h * (m + alpha)``.

    *h0* bounds the spacing, *L* is the radius of the smooth factor's support
    and *Lprime* the radius on which the kernel expansion is valid.
    """

    n: int
    h: float
    alpha: tuple[float, ...] = None
    m: tuple[int, ...] = None
    h0: float = 1.0
    L: float = 2.0
    Lprime: float = math.inf

    def __post_init__(self):
        n = self.n
        if n not in range(1, MAX_DIMENSION + 1):
            raise InvalidParametersError(f"dimension must be 1, 2 or 3, got {n}")
        alpha = (0.0,) * n if self.alpha is None else tuple(float(a) for a in np.atleast_1d(self.alpha))
        m = (0,) * n if self.m is None else tuple(int(k) for k in np.atleast_1d(self.m))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "m", m)

        if len(alpha) != n or len(m) != n:
            raise InvalidParametersError("alpha and m must have length n")
        if not (0 < self.h < self.h0 <= 1):
            raise InvalidParametersError(
                f"need 0 < h < h0 <= 1, got h={self.h}, h0={self.h0}")
        if max(abs(a) for a in alpha) > 0.5:
            raise InvalidParametersError(f"|alpha|_inf must be <= 1/2, got {alpha}")
        if not (0 < self.L + 1.5 * self.h0 * math.sqrt(n) < self.Lprime):
            raise InvalidParametersError(
                f"need 0 < L + 3/2 h0 sqrt(n) < L', got L={self.L}, "
                f"h0={self.h0}, L'={self.Lprime}")

    @classmethod
    def from_singularity(cls, x0, h: float, **kwargs) -> GridContext:
        m, alpha = split_singularity(x0, h)
        return cls(n=len(m), h=h, alpha=alpha, m=m, **kwargs)

    @property
    def x0(self) -> np.ndarray:
        return self.h * (np.asarray(self.m, dtype=float) + np.asarray(self.alpha))

    def with_h(self, h: float, **changes) -> GridContext:
        return replace(self, h=h, **changes)

    def check_stencil(self, points, plateau_fraction: float = 0.75) -> None:
        """Require all stencil nodes on the coarsest grid to sit on the window plateau."""
        reach = max(float(np.linalg.norm(c)) for c in points)
        if self.L * plateau_fraction < self.h0 * reach:
            raise InvalidParametersError(
                f"window radius L={self.L} too small for stencil reach {reach} "
                f"at h0={self.h0} (plateau fraction {plateau_fraction})")


# }}}


# {{{ kernels and smooth factors


@dataclass(frozen=True)
class SingularKernel:
    """Point singularity ``|x|^gamma * l(|x|, x/|x|)``.

    *angular* is the r-independent profile ``l_0``.  When the kernel depends on
    ``r``, *full* evaluates ``l(r, u)`` and *radial_expansion* lists the Taylor
    coefficients ``phi_k(u)`` of ``l`` at ``r = 0``; a ``None`` entry marks an
    identically vanishing term.
    """

    n: int
    gamma: float
    angular: ArrayFunction
    radial_expansion: tuple[ArrayFunction | None, ...] | None = None
    full: RadialFunction | None = None
    kernel_id: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n not in range(1, MAX_DIMENSION + 1):
            raise InvalidParametersError(f"dimension must be 1, 2 or 3, got {self.n}")
        if not self.gamma > -self.n:
            raise InvalidParametersError(
                f"gamma={self.gamma} is not integrable in dimension {self.n}")
        if self.radial_expansion is not None:
            object.__setattr__(self, "radial_expansion", tuple(self.radial_expansion))

    @property
    def is_r_independent(self) -> bool:
        return self.radial_expansion is None and self.full is None

    def profile(self, r: np.ndarray, u: np.ndarray) -> np.ndarray:
        if self.full is not None:
            return self.full(r, u)
        return self.angular(u)

    def __call__(self, d: np.ndarray) -> np.ndarray:
        """Evaluate the kernel at displacements ``d`` of shape ``(N, n)``."""
        d = np.asarray(d, dtype=float)
        r = np.linalg.norm(d, axis=-1)
        u = d / r[..., None]
        return r ** self.gamma * self.profile(r, u)

    def expansion_term(self, k: int) -> SingularKernel | None:
        """The r-independent kernel ``|x|^(gamma+k) phi_k(x/|x|)``."""
        if self.radial_expansion is None:
            if self.full is not None:
                raise InsufficientExpansionError(
                    f"kernel {self.kernel_id!r} depends on r but has no expansion")
            return SingularKernel(self.n, self.gamma, self.angular,
                                  kernel_id=self.kernel_id, params=self.params) if k == 0 else None
        if k >= len(self.radial_expansion):
            raise InsufficientExpansionError(
                f"kernel {self.kernel_id!r} supplies {len(self.radial_expansion)} "
                f"expansion terms, term {k} requested")
        phi = self.radial_expansion[k]
        if phi is None:
            return None
        return SingularKernel(self.n, self.gamma + k, phi,
                              kernel_id=f"{self.kernel_id}/phi{k}", params=self.params)


@dataclass(frozen=True)
class SmoothFactor:
    """Smooth compactly supported factor ``v``, zero outside a ball about the origin."""

    value: ArrayFunction
    support_radius: float
    factor_id: str = "custom"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(np.asarray(x, dtype=float))

    def check_support(self, n: int, samples: int = 256, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        u = rng.normal(size=(samples, n))
        u /= np.linalg.norm(u, axis=1)[:, None]
        r = self.support_radius * (1.0 + rng.random(samples))
        vals = self(u * r[:, None])
        if np.any(vals != 0):
            raise InvalidParametersError(
                f"smooth factor {self.factor_id!r} is nonzero outside radius "
                f"{self.support_radius}")


# }}}
