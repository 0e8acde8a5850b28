"""Correction weights for the corrected trapezoidal rule.

For every level ``h`` of a ladder the weights ``omega(h)`` solve the moment
system ``K omega(h) = V(h)``, which makes the corrected rule exact on the
windowed singular monomials ``s0(x - h alpha) P_nu(x - h alpha)``.  The
h-independent weights are obtained by Richardson extrapolation of the ladder.
"""

from __future__ import annotations

import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from singquad.core import (
    GridContext,
    IncompatibleWeightsError,
    InvalidParametersError,
    MultiIndex,
    NoConvergenceError,
    OutOfRangeError,
    SingquadError,
    StencilDegenerateError,
    enumerate_multi_indices,
    pi_count,
)
from singquad.cutoff import RadialCutoff, make_standard_cutoff
from singquad.lattice import punctured_trapezoid
from singquad.moments import (
    DEFAULT_ANGULAR_RESOLUTION,
    DEFAULT_GLUE_POINTS,
    angular_rule,
    moment_integral,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CONDITION_LIMIT = 1e12
DEFAULT_TOL = 1e-6


# {{{ stencils


@dataclass(frozen=True)
class Stencil:
    points: tuple[tuple[int, ...], ...]
    order: int

    def __post_init__(self):
        pts = tuple(tuple(int(x) for x in np.atleast_1d(c)) for c in self.points)
        object.__setattr__(self, "points", pts)
        n = len(pts[0])
        if any(len(c) != n for c in pts):
            raise InvalidParametersError("stencil points have mixed dimensions")
        if (0,) * n not in pts:
            raise InvalidParametersError("stencil must contain the origin")
        if len(set(pts)) != len(pts):
            raise InvalidParametersError("stencil points must be distinct")
        if len(pts) != pi_count(self.order, n):
            raise InvalidParametersError(
                f"order {self.order} needs {pi_count(self.order, n)} points, got {len(pts)}")

    @property
    def n(self) -> int:
        return len(self.points[0])

    def __len__(self):
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)


def default_stencil(p: int, n: int) -> Stencil:
    """Non-negative integer points with ``|c|_1 <= p``, graded lexicographic."""
    return Stencil(tuple(tuple(nu) for nu in enumerate_multi_indices(p, n)), p)


def assemble_K(stencil: Stencil, alpha, indices) -> tuple[np.ndarray, float]:
    """Moment matrix ``K[j, i] = (c_i - alpha)^nu_j`` and its 2-norm condition number."""
    indices = [MultiIndex(nu) for nu in indices]
    if len(indices) != len(stencil):
        raise InvalidParametersError(
            f"{len(indices)} multi-indices for {len(stencil)} stencil points")
    shifted = stencil.as_array() - np.asarray(alpha, dtype=float)
    K = np.array([nu.monomial(shifted) for nu in indices])
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(K))
    if not math.isfinite(cond):
        cond = math.inf
    return K, cond


# }}}


# {{{ right-hand side


def default_L(stencil: Stencil, h0: float, cutoff: RadialCutoff) -> float:
    """Smallest convenient window radius keeping the coarse stencil on the plateau."""
    reach = max(float(np.linalg.norm(c)) for c in stencil.points) + 0.5 * math.sqrt(stencil.n)
    return max(2.0, h0 * reach / cutoff.a)


def default_ladder(n: int, levels: int = 4) -> list[float]:
    h_base = 1 / 16 if n <= 2 else 1 / 8
    return [h_base * 2.0 ** -j for j in range(levels)]


def _lattice_moments(kernel, indices, grid: GridContext, cutoff: RadialCutoff, workers=1):
    x0 = grid.x0
    L = grid.L

    def f(y):
        d = y - x0
        r = np.linalg.norm(d, axis=1)
        base = kernel(d) * cutoff.profile(r / L)
        return np.stack([base * nu.monomial(d) for nu in indices], axis=1)

    radius = cutoff.b * L + float(np.linalg.norm(x0))
    return np.atleast_1d(punctured_trapezoid(f, radius, grid, workers=workers))


def R_vector(kernel, indices, grid: GridContext, cutoff: RadialCutoff, angular=None,
             glue_points: int = DEFAULT_GLUE_POINTS, workers: int = 1) -> np.ndarray:
    """Scaled punctured-rule errors ``R_nu(h)`` for all multi-indices at once."""
    indices = [MultiIndex(nu) for nu in indices]
    rule = angular if angular is not None else angular_rule(kernel.n)
    exact = np.array([moment_integral(kernel, nu, cutoff, grid.L, rule, glue_points)
                      for nu in indices])
    lattice = _lattice_moments(kernel, indices, grid, cutoff, workers)
    scale = np.array([grid.h ** (kernel.gamma + grid.n + nu.order) for nu in indices])
    return (exact - lattice) / scale


def compute_R_beta(kernel, beta, grid: GridContext, cutoff: RadialCutoff | None = None, *,
                   angular=None, glue_points: int = DEFAULT_GLUE_POINTS,
                   workers: int = 1) -> float:
    """``(I - T_h^0)[s0(. - h alpha) P_beta(. - h alpha)] / h^(gamma + n + |beta|)``.

    The window ``P_beta`` uses the radius ``grid.L``.
    """
    if not kernel.is_r_independent:
        raise InvalidParametersError("R_beta is defined for r-independent kernels only")
    cutoff = cutoff or make_standard_cutoff()
    return float(R_vector(kernel, [beta], grid, cutoff, angular, glue_points, workers)[0])


# }}}


# {{{ weight sets


@dataclass(frozen=True)
class WeightSet:
    stencil: Stencil
    omega: tuple[float, ...]
    alpha: tuple[float, ...]
    gamma: float
    kernel_id: str = "custom"
    kernel_params: dict = field(default_factory=dict)
    ladder: tuple[tuple[float, tuple[float, ...]], ...] = ()
    extrapolants: tuple[tuple[float, ...], ...] = ()
    residuals: tuple[float, ...] = ()
    residual_norm: float = 0.0
    condition_number: float = 1.0
    cutoff: RadialCutoff = field(default_factory=make_standard_cutoff)
    L: float = 2.0
    angular_resolution: int = 0
    glue_points: int = DEFAULT_GLUE_POINTS
    converged: bool = True
    provenance: str = "synthesized"
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if len(self.omega) != len(self.stencil):
            raise InvalidParametersError(
                f"{len(self.omega)} weights for {len(self.stencil)} stencil points")
        if not math.isfinite(self.condition_number):
            raise InvalidParametersError("condition number must be finite")

    @property
    def p(self) -> int:
        return self.stencil.order

    @property
    def n(self) -> int:
        return self.stencil.n

    def level(self, h: float) -> WeightSet:
        """Weights of a single ladder level, without extrapolation."""
        for hj, omega in self.ladder:
            if hj == h:
                return replace(self, omega=omega, extrapolants=(), flags=self.flags + ("level",))
        raise KeyError(f"no ladder level at h={h}")

    def to_record(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "n": self.n,
            "gamma": self.gamma,
            "p": self.p,
            "kernel_id": self.kernel_id,
            "kernel_params": self.kernel_params,
            "stencil": [list(c) for c in self.stencil.points],
            "alpha": list(self.alpha),
            "omega": list(self.omega),
            "ladder": [{"h": h, "omega": list(w)} for h, w in self.ladder],
            "extrapolants": [list(w) for w in self.extrapolants],
            "residuals": list(self.residuals),
            "residual_norm": self.residual_norm,
            "condition_number": self.condition_number,
            "cutoff": self.cutoff.to_dict(),
            "L": self.L,
            "angular_resolution": self.angular_resolution,
            "glue_points": self.glue_points,
            "converged": self.converged,
            "provenance": self.provenance,
            "flags": list(self.flags),
        }

    @classmethod
    def from_record(cls, rec: dict, provenance: str | None = None) -> WeightSet:
        try:
            if rec.get("format_version") != FORMAT_VERSION:
                raise InvalidParametersError(
                    f"unsupported weight format version {rec.get('format_version')!r}")
            cut = rec["cutoff"]
            return cls(
                stencil=Stencil(tuple(tuple(c) for c in rec["stencil"]), int(rec["p"])),
                omega=tuple(float(w) for w in rec["omega"]),
                alpha=tuple(float(a) for a in rec["alpha"]),
                gamma=float(rec["gamma"]),
                kernel_id=rec["kernel_id"],
                kernel_params=rec.get("kernel_params", {}),
                ladder=tuple((float(e["h"]), tuple(float(w) for w in e["omega"]))
                             for e in rec.get("ladder", [])),
                extrapolants=tuple(tuple(float(w) for w in e)
                                   for e in rec.get("extrapolants", [])),
                residuals=tuple(float(x) for x in rec.get("residuals", [])),
                residual_norm=float(rec["residual_norm"]),
                condition_number=float(rec["condition_number"]),
                cutoff=RadialCutoff(float(cut["a"]), float(cut["b"]), cut["profile_id"]),
                L=float(rec.get("L", 2.0)),
                angular_resolution=int(rec["angular_resolution"]),
                glue_points=int(rec["glue_points"]),
                converged=bool(rec.get("converged", True)),
                provenance=provenance or rec.get("provenance", "file"),
                flags=tuple(rec.get("flags", [])),
            )
        except KeyError as exc:
            raise InvalidParametersError(f"weight record lacks field {exc}") from None

    def check_compatible(self, kernel, alpha, atol: float = 0.0) -> None:
        if self.n != kernel.n:
            raise IncompatibleWeightsError(f"weights for n={self.n}, kernel has n={kernel.n}")
        if self.gamma != kernel.gamma:
            raise IncompatibleWeightsError(
                f"weights for gamma={self.gamma}, kernel has gamma={kernel.gamma}")
        if kernel.kernel_id != "custom" and self.kernel_id not in ("custom", kernel.kernel_id):
            raise IncompatibleWeightsError(
                f"weights for kernel {self.kernel_id!r}, got {kernel.kernel_id!r}")
        if np.max(np.abs(np.subtract(self.alpha, alpha))) > atol:
            raise IncompatibleWeightsError(
                f"weights computed at alpha={self.alpha}, grid has alpha={tuple(alpha)}")


# }}}


def _richardson(ladder, omegas):
    out = []
    for j in range(1, len(ladder)):
        rho = ladder[j - 1] / ladder[j]
        out.append((rho * omegas[j] - omegas[j - 1]) / (rho - 1.0))
    return out


def solve_weights(kernel, stencil: Stencil, alpha, grid_template: GridContext | None = None,
                  cutoff: RadialCutoff | None = None, ladder=None, tol: float = DEFAULT_TOL, *,
                  angular_resolution: int | None = None,
                  glue_points: int = DEFAULT_GLUE_POINTS, strict: bool = True,
                  workers: int = 1) -> WeightSet:
    """Synthesize limit weights for an r-independent *kernel* at offset *alpha*.

    Each ladder level solves ``K omega(h) = V(h)``; the limit is estimated by
    componentwise first-order Richardson extrapolation and accepted once two
    successive extrapolants agree to *tol* in the max norm.

    Raises
    ------
    StencilDegenerateError
        If ``K`` is singular or its condition number exceeds 1e12.
    NoConvergenceError
        If *strict* and the extrapolants do not settle within the ladder.
    """
    n = kernel.n
    if not kernel.is_r_independent:
        raise InvalidParametersError("weights are synthesized for r-independent kernels")
    if stencil.n != n:
        raise InvalidParametersError(f"stencil dimension {stencil.n} != kernel dimension {n}")
    alpha = tuple(float(a) for a in np.atleast_1d(alpha))
    cutoff = cutoff or make_standard_cutoff()
    ladder = [float(h) for h in (ladder if ladder is not None else default_ladder(n))]
    if not ladder or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidParametersError(f"ladder must be strictly decreasing, got {ladder}")
    if strict and len(ladder) < 3:
        raise InvalidParametersError("a convergence check needs at least three ladder levels")
    if grid_template is None:
        h0 = min(1.0, 2.0 * ladder[0])
        grid_template = GridContext(n, ladder[0] / 2, alpha, h0=h0,
                                    L=default_L(stencil, h0, cutoff))
    L = grid_template.L
    if ladder[0] >= grid_template.h0:
        raise InvalidParametersError(f"ladder starts at {ladder[0]} >= h0={grid_template.h0}")

    reach = float(np.max(np.linalg.norm(stencil.as_array() - np.asarray(alpha), axis=1)))
    if ladder[0] * reach > cutoff.a * L:
        raise InvalidParametersError(
            f"stencil leaves the window plateau at h={ladder[0]} (L={L}, plateau {cutoff.a})")

    indices = enumerate_multi_indices(stencil.order, n)
    K, cond = assemble_K(stencil, alpha, indices)
    if not cond < CONDITION_LIMIT:
        raise StencilDegenerateError(
            f"moment matrix is singular or ill-conditioned (cond={cond:.3g}) "
            f"for stencil {stencil.points} at alpha={alpha}", cond)

    res = angular_resolution or DEFAULT_ANGULAR_RESOLUTION[n]
    rule = angular_rule(n, res)
    omegas, residuals = [], []
    for h in ladder:
        grid = GridContext(n, h, alpha, h0=grid_template.h0, L=L, Lprime=grid_template.Lprime)
        V = R_vector(kernel, indices, grid, cutoff, rule, glue_points, workers)
        omega = np.linalg.solve(K, V)
        residual = float(np.max(np.abs(K @ omega - V)))
        residuals.append(residual / max(float(np.max(np.abs(V))), np.finfo(float).tiny))
        omegas.append(omega)
        logger.debug("h=%g omega=%s residual=%.2e", h, omega, residual)

    extrap = _richardson(ladder, omegas)
    if extrap:
        omega_final = extrap[-1]
    else:
        omega_final = omegas[-1]
    gap = (float(np.max(np.abs(extrap[-1] - extrap[-2]))) if len(extrap) >= 2 else math.inf)
    converged = gap < tol
    if strict and not converged:
        raise NoConvergenceError(
            f"weight extrapolants differ by {gap:.3g} > tol={tol} "
            f"(kernel {kernel.kernel_id!r}, alpha={alpha}, p={stencil.order})",
            best=tuple(omega_final), gap=gap,
            diagnostics={"ladder": ladder, "omegas": [w.tolist() for w in omegas]})

    flags = ()
    if max(abs(a) for a in alpha) == 0.5:
        flags += ("tie-region",)
    if not converged:
        flags += ("not-converged",)
    return WeightSet(
        stencil=stencil, omega=tuple(omega_final), alpha=alpha, gamma=kernel.gamma,
        kernel_id=kernel.kernel_id, kernel_params=dict(kernel.params),
        ladder=tuple((h, tuple(w)) for h, w in zip(ladder, omegas)),
        extrapolants=tuple(tuple(w) for w in extrap),
        residuals=tuple(residuals),
        residual_norm=float(np.max(np.abs(K @ omegas[-1] - V))),
        condition_number=cond, cutoff=cutoff, L=L, angular_resolution=res,
        glue_points=glue_points, converged=converged, flags=flags)


def synthesize_weights(kernel, p: int, alpha, **kwargs) -> WeightSet:
    """:func:`solve_weights` with the default stencil of order *p*."""
    return solve_weights(kernel, default_stencil(p, kernel.n), alpha, **kwargs)


class WeightCache:
    """Memoising weight provider ``(kernel, order, alpha) -> WeightSet``.

    Kernels are keyed by ``(kernel_id, gamma)``, so distinct kernels must carry
    distinct ids.
    """

    def __init__(self, **solve_kwargs):
        self.solve_kwargs = solve_kwargs
        self._store: dict = {}

    def __call__(self, kernel, order: int, alpha) -> WeightSet:
        alpha = tuple(float(a) for a in np.atleast_1d(alpha))
        key = (kernel.kernel_id, kernel.gamma, order, alpha)
        if key not in self._store:
            self._store[key] = synthesize_weights(kernel, order, alpha, **self.solve_kwargs)
        return self._store[key]

    def add(self, ws: WeightSet) -> None:
        self._store[(ws.kernel_id, ws.gamma, ws.p, ws.alpha)] = ws


# {{{ tables


@dataclass(frozen=True)
class WeightTable:
    """Weight sets on the uniform offset grid ``[-1/2, 1/2]^n``."""

    n: int
    resolution: int
    entries: dict
    failures: dict = field(default_factory=dict)
    kernel: object = field(default=None, compare=False, repr=False)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-0.5, 0.5, self.resolution + 1)

    def to_record(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "grid": {"n": self.n, "resolution": self.resolution,
                     "axis": self.axis.tolist()},
            "entries": [{"index": list(k), **ws.to_record()}
                        for k, ws in sorted(self.entries.items())],
            "failures": [{"index": list(k), "error": msg}
                         for k, msg in sorted(self.failures.items())],
        }

    @classmethod
    def from_record(cls, rec: dict) -> WeightTable:
        grid = rec["grid"]
        entries = {tuple(e["index"]): WeightSet.from_record(e, provenance="file")
                   for e in rec["entries"]}
        failures = {tuple(e["index"]): e["error"] for e in rec.get("failures", [])}
        return cls(int(grid["n"]), int(grid["resolution"]), entries, failures)


def tabulate_weights(kernel, p: int, alpha_grid_resolution: int, *, stencil=None,
                     workers: int = 1, **solve_kwargs) -> WeightTable:
    """Solve for weights at every node of the offset grid; failures are recorded."""
    res = int(alpha_grid_resolution)
    if res < 2:
        raise InvalidParametersError(f"resolution must be >= 2, got {res}")
    n = kernel.n
    stencil = stencil or default_stencil(p, n)
    axis = np.linspace(-0.5, 0.5, res + 1)
    keys = list(product(range(res + 1), repeat=n))

    def work(key):
        alpha = tuple(float(axis[i]) for i in key)
        try:
            return key, solve_weights(kernel, stencil, alpha, **solve_kwargs), None
        except SingquadError as exc:
            return key, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, keys))
    else:
        results = [work(k) for k in keys]
    entries = {k: ws for k, ws, _ in results if ws is not None}
    failures = {k: err for k, _, err in results if err is not None}
    return WeightTable(n, res, entries, failures, kernel)


NEAR_RING = 2


def _near_terms(kernel, alpha, indices) -> np.ndarray:
    """``sum_j s0(j - alpha) (j - alpha)^nu`` over nodes ``0 < |j|_inf <= NEAR_RING``.

    These lattice terms of the punctured rule are the only part of the limit
    moments that varies rapidly with alpha near the faces of the offset cube.
    """
    n = len(alpha)
    ring = np.array([j for j in product(range(-NEAR_RING, NEAR_RING + 1), repeat=n) if any(j)],
                    dtype=float)
    d = ring - np.asarray(alpha, dtype=float)
    s = kernel(d)
    return np.array([math.fsum((s * MultiIndex(nu).monomial(d)).tolist()) for nu in indices])


def interpolate_weights(table: WeightTable, alpha, kernel=None) -> WeightSet:
    """Tensor-product cubic interpolation of the tabulated weights in alpha.

    When the kernel is known (passed in, or kept from :func:`tabulate_weights`)
    the interpolated quantity is the regularised moment vector
    ``K(alpha) omega(alpha) + near(alpha)``, where ``near`` adds back the
    lattice terms closest to the singularity; it is far smoother in alpha than
    ``omega`` itself, and ``omega`` is recovered by one small solve.  Without a
    kernel the weights are interpolated directly.  Grids with fewer than four
    nodes per axis fall back to linear interpolation.
    """
    from scipy.interpolate import make_interp_spline

    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (table.n,) or np.any(np.abs(alpha) > 0.5):
        raise OutOfRangeError(f"alpha={alpha.tolist()} outside [-1/2, 1/2]^{table.n}")
    if table.failures:
        raise SingquadError(f"table has {len(table.failures)} failed entries")

    axis = table.axis
    spacing = 1.0 / table.resolution
    hit = [np.flatnonzero(axis == a) for a in alpha]
    flags = ("interpolated",)
    if np.max(np.abs(alpha)) > 0.5 - spacing:
        flags += ("tie-region",)
    if all(len(i) for i in hit):
        ws = table.entries[tuple(int(i[0]) for i in hit)]
        return replace(ws, provenance="interpolated", flags=flags)

    sample = next(iter(table.entries.values()))
    kernel = kernel if kernel is not None else table.kernel
    indices = enumerate_multi_indices(sample.p, table.n)
    shape = (table.resolution + 1,) * table.n
    values = np.empty(shape + (len(sample.omega),))
    for key, ws in table.entries.items():
        if kernel is None:
            values[key] = ws.omega
        else:
            K, _ = assemble_K(ws.stencil, ws.alpha, indices)
            values[key] = K @ np.asarray(ws.omega) + _near_terms(kernel, ws.alpha, indices)
    # tensor-product spline: collapse one axis at a time
    degree = 3 if table.resolution >= 3 else 1
    for a in alpha:
        values = make_interp_spline(axis, values, k=degree, axis=0)(a)
    K, cond = assemble_K(sample.stencil, alpha, indices)
    if kernel is None:
        omega = values
    else:
        omega = np.linalg.solve(K, values - _near_terms(kernel, alpha, indices))
    return replace(sample, omega=tuple(omega), alpha=tuple(alpha), ladder=(), extrapolants=(),
                   residuals=(), residual_norm=math.nan, condition_number=cond,
                   provenance="interpolated", flags=flags)


# }}}


# {{{ files


def dumps17(obj, indent: int | None = 2) -> str:
    """JSON text with every real written to 17 significant digits."""
    reals: list[str] = []

    def conv(o):
        if isinstance(o, (bool, np.bool_)) or o is None or isinstance(o, str):
            return bool(o) if isinstance(o, np.bool_) else o
        if isinstance(o, (int, np.integer)):
            return int(o)
        if isinstance(o, (float, np.floating)):
            if not math.isfinite(o):
                return None if math.isnan(o) else str(o)
            reals.append(format(float(o), ".17g"))
            return f"\x00{len(reals) - 1}\x00"
        if isinstance(o, dict):
            return {str(k): conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple, np.ndarray)):
            return [conv(v) for v in o]
        raise TypeError(f"cannot serialize {type(o).__name__}")

    text = json.dumps(conv(obj), indent=indent)
    return re.sub(r'"\\u0000(\d+)\\u0000"', lambda m: reals[int(m.group(1))], text)


def save_weights(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps17(obj.to_record()))
        fh.write("\n")


def load_weights(path):
    """Read a weight file written by :func:`save_weights`."""
    with open(path) as fh:
        rec = json.load(fh)
    if "grid" in rec:
        return WeightTable.from_record(rec)
    return WeightSet.from_record(rec, provenance="file")


# }}}
