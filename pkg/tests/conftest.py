import math

import mpmath as mp
import numpy as np
import pytest

from singquad.catalog import make_kernel, make_smooth_factor


def naive_sum(func, h, n, radius, skip=None):
    """Plain loop over the lattice; independent of the slab/visitor code."""
    k = int(math.ceil(radius / h)) + 2
    total = []
    rng = range(-k, k + 1)
    if n == 1:
        nodes = ((i,) for i in rng)
    else:
        nodes = ((i, j) for i in rng for j in rng)
    for node in nodes:
        if skip is not None and tuple(node) == tuple(skip):
            continue
        y = [h * c for c in node]
        total.append(func(y))
    return h ** n * math.fsum(total)


def mp_profile(r, a=0.25, b=1.0):
    """Exponential partition-of-unity profile in extended precision."""
    t = (b - r) / (b - a)
    if t <= 0:
        return mp.mpf(0)
    if t >= 1:
        return mp.mpf(1)
    e0, e1 = mp.exp(-1 / t), mp.exp(-1 / (1 - t))
    return e0 / (e0 + e1)


def mp_radial(e, L=1.0, a=0.25, b=1.0):
    """``int_0^inf r^e profile(r / L) dr`` with mpmath."""
    with mp.workdps(30):
        plateau = mp.mpf(a * L) ** (e + 1) / (e + 1)
        edges = [a * L + (b - a) * L * j / 8 for j in range(9)]
        return plateau + mp.quad(lambda r: r ** e * mp_profile(r / L, a, b), edges)


@pytest.fixture
def const2():
    return make_kernel({"gamma": -1.0}, 2)


@pytest.fixture
def const1():
    return make_kernel({"gamma": -0.5}, 1)


@pytest.fixture
def bump2():
    return make_smooth_factor({"type": "window_exp", "rate": [0.7, -0.4]}, 2)


@pytest.fixture
def bump1():
    return make_smooth_factor({"type": "window_exp", "rate": [0.7]}, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
