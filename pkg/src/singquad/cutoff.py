"""Smooth radial cutoffs: identically one on a plateau, zero beyond the support."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from singquad.core import InvalidParametersError

PROFILE_ID = "exp-partition-of-unity"

# Plateau/support radii of the default window.  A wide transition band keeps
# the lattice error of windowed integrands small at moderate resolution.
DEFAULT_PLATEAU = 0.25
DEFAULT_SUPPORT = 1.0


def _e(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``, ``g(1 - t) = 1 - g(t)``."""
    a, b = _e(t), _e(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


@dataclass(frozen=True)
class RadialCutoff:
    """Radial profile equal to 1 on ``[0, a]`` and 0 on ``[b, inf)``."""

    a: float
    b: float
    profile_id: str = PROFILE_ID

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        t = np.clip((self.b - r) / (self.b - self.a), 0.0, 1.0)
        return smooth_step(t)

    __call__ = profile

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "profile_id": self.profile_id}


def make_standard_cutoff(a: float = DEFAULT_PLATEAU, b: float = DEFAULT_SUPPORT) -> RadialCutoff:
    if not 0 < a < b:
        raise InvalidParametersError(f"need 0 < a < b, got a={a}, b={b}")
    return RadialCutoff(float(a), float(b))


def eval_window(c: RadialCutoff, R: float, x):
    """``psi_R(x) = profile(|x| / R)``; accepts one point or an ``(N, n)`` array."""
    if not R > 0:
        raise InvalidParametersError(f"window scale must be positive, got {R}")
    x = np.asarray(x, dtype=float)
    return c.profile(np.linalg.norm(np.atleast_1d(x), axis=-1) / R)
