import mpmath as mp
import numpy as np
import pytest

from conftest import mp_radial, naive_sum
from singquad.catalog import make_kernel, make_smooth_factor
from singquad.core import EvaluationError, GridContext
from singquad.cutoff import make_standard_cutoff
from singquad.lattice import (
    lattice_sum,
    punctured_trapezoid,
    stencil_punctured_trapezoid,
    trapezoid,
)
from singquad.rules import punctured_rule


def zero(y):
    return np.zeros(len(y))


def window_integral_2d(R):
    return float(2 * mp.pi * mp_radial(1.0, R))


def test_zero_integrand():
    g = GridContext(2, 0.1)
    assert trapezoid(zero, 1.0, g) == 0.0
    assert punctured_trapezoid(zero, 1.0, g) == 0.0
    assert stencil_punctured_trapezoid(zero, 1.0, g, [(0, 0), (1, 0)]) == 0.0


def test_hat_function():
    g = GridContext(1, 0.5)

    def hat(y):
        return np.maximum(0.0, 1 - np.abs(y[:, 0]) / 0.5)

    assert trapezoid(hat, 0.5, g) == 0.5


def test_window_matches_quadrature():
    c = make_standard_cutoff()

    def window(y):
        return c.profile(np.linalg.norm(y, axis=1))

    exact = window_integral_2d(1.0)
    approx = trapezoid(window, 1.0, GridContext(2, 1 / 64))
    assert abs(approx - exact) / exact < 1e-12


def test_spectral_decay():
    c = make_standard_cutoff()

    def window(y):
        return c.profile(np.linalg.norm(y, axis=1))

    exact = window_integral_2d(1.0)
    errs = [abs(trapezoid(window, 1.0, GridContext(2, h)) - exact) for h in (1 / 16, 1 / 32, 1 / 64)]
    assert errs[1] < errs[0] / 2 ** 8
    assert errs[2] < errs[1] / 2 ** 8


def test_punctured_definition(rng):
    g = GridContext(2, 0.1, m=(1, -2))
    coef = rng.normal(size=2)

    def f(y):
        return np.cos(y @ coef) * np.exp(-np.sum(y ** 2, axis=1))

    def f_zeroed(y):
        out = f(y)
        hit = np.all(np.isclose(y, [0.1, -0.2], atol=1e-12), axis=1)
        out[hit] = 0.0
        return out

    assert punctured_trapezoid(f, 2.0, g) == pytest.approx(trapezoid(f_zeroed, 2.0, g), rel=1e-15)
    one = stencil_punctured_trapezoid(f, 2.0, g, [(0, 0)])
    assert one == punctured_trapezoid(f, 2.0, g)


def test_stencil_identity():
    g = GridContext(2, 0.125)

    def f(y):
        return np.exp(-np.sum(y ** 2, axis=1)) * (1 + y[:, 0])

    full = trapezoid(f, 3.0, g)
    expected = full - g.h ** 2 * (f(np.array([[0.0, 0.0]]))[0] + f(np.array([[0.125, 0.0]]))[0])
    got = stencil_punctured_trapezoid(f, 3.0, g, [(0, 0), (1, 0)])
    assert got == pytest.approx(expected, rel=1e-14)


def test_punctured_rule_vs_naive_1d():
    k = make_kernel({"gamma": -0.5}, 1)
    v = make_smooth_factor({"type": "window"}, 1)
    g = GridContext(1, 1 / 32)
    c = make_standard_cutoff()

    def point(y):
        r = abs(y[0])
        return r ** -0.5 * float(c.profile(r))

    ref = naive_sum(point, g.h, 1, 1.0, skip=(0,))
    assert punctured_rule(k, v, g) == pytest.approx(ref, rel=1e-13)


def test_linearity(rng):
    g = GridContext(2, 0.05, alpha=(0.2, -0.1))
    a, b = rng.normal(size=2)

    def f1(y):
        return np.exp(-np.sum(y ** 2, axis=1))

    def f2(y):
        return np.sin(3 * y[:, 0]) * np.exp(-np.sum(y ** 2, axis=1))

    combo = punctured_trapezoid(lambda y: a * f1(y) + b * f2(y), 4.0, g)
    split = a * punctured_trapezoid(f1, 4.0, g) + b * punctured_trapezoid(f2, 4.0, g)
    assert combo == pytest.approx(split, rel=1e-13)


def test_translation_covariance():
    h = 0.05
    shift = np.array([3, -2])
    x0 = np.array([0.2, -0.35]) * h

    def f(y):
        d = y - x0
        return np.linalg.norm(d, axis=1) ** -1.0 * np.exp(-np.sum(y ** 2, axis=1))

    def g_shifted(y):
        return f(y - h * shift)

    base = punctured_trapezoid(f, 5.0, GridContext(2, h))
    moved = punctured_trapezoid(g_shifted, 5.0 + h * np.linalg.norm(shift),
                                GridContext(2, h, m=tuple(shift)))
    assert moved == pytest.approx(base, rel=1e-12)


def test_vector_output_and_workers():
    g = GridContext(2, 1 / 40)

    def f(y):
        r2 = np.sum(y ** 2, axis=1)
        return np.stack([np.exp(-r2), r2 * np.exp(-r2)], axis=1)

    serial = punctured_trapezoid(f, 3.0, g)
    threaded = punctured_trapezoid(f, 3.0, g, workers=4)
    assert serial.shape == (2,)
    np.testing.assert_array_equal(serial, threaded)


def test_non_finite_value_reports_node():
    def bad(y):
        out = np.ones(len(y))
        out[np.all(y == 0, axis=1)] = np.inf
        return out

    with pytest.raises(EvaluationError):
        lattice_sum(bad, 1.0, 0.25, 2)
    assert lattice_sum(bad, 1.0, 0.25, 2, excluded=[(0, 0)]) > 0
