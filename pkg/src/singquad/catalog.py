"""Named kernels and smooth factors used by the command line and the studies.

Kernel description (JSON object)::

    {"gamma": -1.0,
     "angular": "const" | "cos_<k>" | "sin_<k>" | "sign" | {"harmonics": [[k, a_k, b_k], ...]},
     "radial": null | {"type": "exp", "rate": c, "terms": 8}
                    | {"type": "poly", "coeffs": [a_0, a_1, ...]},
     "expansion": "exact" | "numeric"}

Harmonics and ``cos_<k>``/``sin_<k>`` are circle harmonics in n = 2; ``sign``
(``l0(u) = u``) exists only in n = 1.  A radial part multiplies the angular
profile: ``l(r, u) = exp(c r) l0(u)`` or ``sum_k a_k r^k l0(u)``.

Smooth factor description::

    {"type": "zero"}
    {"type": "window", "radius": 1.0, "center": [..], "plateau": 0.25}
    {"type": "window_poly", ..., "terms": [[[i, j], coef], ...]}
    {"type": "window_exp", ..., "rate": [..]}
"""

from __future__ import annotations

import math
import re

import numpy as np

from singquad.core import InvalidParametersError, MultiIndex, SingularKernel, SmoothFactor
from singquad.cutoff import DEFAULT_SUPPORT, make_standard_cutoff

DEFAULT_EXP_TERMS = 8
POLY_PAD = 16


def _angle(u):
    return np.arctan2(u[:, 1], u[:, 0])


def make_angular(desc, n: int):
    """Return ``(callable, id)`` for an angular profile description."""
    if isinstance(desc, dict):
        if n != 2 or "harmonics" not in desc:
            raise InvalidParametersError(f"unsupported angular profile {desc!r} for n={n}")
        terms = [(int(k), float(a), float(b)) for k, a, b in desc["harmonics"]]

        def harmonic(u):
            t = _angle(u)
            out = np.zeros(len(u))
            for k, a, b in terms:
                out = out + a * np.cos(k * t) + b * np.sin(k * t)
            return out

        label = "+".join(f"{a:g}c{k}{b:+g}s{k}" for k, a, b in terms)
        return harmonic, f"harmonic[{label}]"
    if desc == "const":
        return (lambda u: np.ones(len(u))), "const"
    if desc == "sign" and n == 1:
        return (lambda u: np.asarray(u, dtype=float)[:, 0]), "sign"
    m = re.fullmatch(r"(cos|sin)_(\d+)", str(desc))
    if m and n == 2:
        k = int(m.group(2))
        trig = np.cos if m.group(1) == "cos" else np.sin
        return (lambda u: trig(k * _angle(u))), str(desc)
    raise InvalidParametersError(f"unknown angular profile {desc!r} for n={n}")


def numeric_expansion(full, terms: int, step: float = 1e-3):
    """Taylor coefficients ``phi_k(u)`` of ``l(r, u)`` at ``r = 0`` from samples.

    ``l`` is sampled at ``r = j * step`` for ``|j| <= terms + 1`` and interpolated
    by a polynomial.  This is a lower-accuracy fallback for kernels without
    closed-form expansion terms; ``l`` must accept negative ``r``.
    """
    J = terms + 1
    j = np.arange(-J, J + 1, dtype=float)
    inv = np.linalg.inv(np.vander(j, increasing=True))

    def coefficient(k):
        def phi(u):
            u = np.asarray(u, dtype=float)
            samples = np.stack([full(np.full(len(u), t * step), u) for t in j], axis=1)
            return samples @ inv[k] / step ** k
        return phi

    return tuple(coefficient(k) for k in range(terms))


def make_kernel(desc: dict, n: int) -> SingularKernel:
    try:
        gamma = float(desc["gamma"])
    except (KeyError, TypeError, ValueError):
        raise InvalidParametersError("kernel needs a numeric 'gamma'") from None
    angular, kid = make_angular(desc.get("angular", "const"), n)
    radial = desc.get("radial")
    if radial is None:
        return SingularKernel(n, gamma, angular, kernel_id=kid, params=dict(desc))

    kind = radial.get("type")
    if kind == "exp":
        c = float(radial.get("rate", 1.0))
        terms = int(radial.get("terms", DEFAULT_EXP_TERMS))

        def full(r, u):
            return np.exp(c * r) * angular(u)

        def term(k):
            coef = c ** k / math.factorial(k)
            return None if coef == 0 else (lambda u: coef * angular(u))

        expansion = tuple(term(k) for k in range(terms))
        kid += f"*exp({c:g}r)"
    elif kind == "poly":
        coeffs = [float(a) for a in radial["coeffs"]]

        def full(r, u):
            return np.polyval(coeffs[::-1], r) * angular(u)

        def term(k):
            coef = coeffs[k] if k < len(coeffs) else 0.0
            return None if coef == 0 else (lambda u: coef * angular(u))

        expansion = tuple(term(k) for k in range(max(len(coeffs), POLY_PAD)))
        kid += "*poly(" + ",".join(f"{a:g}" for a in coeffs) + ")"
    else:
        raise InvalidParametersError(f"unknown radial profile {radial!r}")

    if desc.get("expansion", "exact") == "numeric":
        terms = int(desc.get("numeric_terms", 3))
        expansion = numeric_expansion(full, terms, float(desc.get("step", 1e-3)))
        kid += "~numeric"
    elif desc.get("expansion", "exact") != "exact":
        raise InvalidParametersError(f"unknown expansion mode {desc.get('expansion')!r}")
    return SingularKernel(n, gamma, angular, radial_expansion=expansion, full=full,
                          kernel_id=kid, params=dict(desc))


def make_smooth_factor(desc: dict, n: int) -> SmoothFactor:
    kind = desc.get("type")
    if kind == "zero":
        return SmoothFactor(lambda x: np.zeros(len(x)), 0.0, "zero")
    if kind not in ("window", "window_poly", "window_exp"):
        raise InvalidParametersError(f"unknown smooth factor {desc!r}")

    radius = float(desc.get("radius", 1.0))
    center = np.asarray(desc.get("center", [0.0] * n), dtype=float)
    if center.shape != (n,) or radius <= 0:
        raise InvalidParametersError(f"bad window geometry in {desc!r}")
    cut = make_standard_cutoff(float(desc.get("plateau", 0.25)), DEFAULT_SUPPORT)

    def window(x):
        return cut.profile(np.linalg.norm(x - center, axis=1) / radius)

    if kind == "window":
        value = window
    elif kind == "window_poly":
        terms = [(MultiIndex(nu), float(c)) for nu, c in desc["terms"]]
        if any(len(nu) != n for nu, _ in terms):
            raise InvalidParametersError("polynomial multi-index has wrong length")

        def value(x):
            poly = np.zeros(len(x))
            for nu, c in terms:
                poly = poly + c * nu.monomial(x)
            return window(x) * poly
    else:
        rate = np.asarray(desc.get("rate", [1.0] * n), dtype=float)

        def value(x):
            return window(x) * np.exp(x @ rate)

    return SmoothFactor(value, float(np.linalg.norm(center)) + radius, kind)
