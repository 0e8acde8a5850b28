import math

import numpy as np
import pytest

from singquad.catalog import make_kernel, make_smooth_factor
from singquad.core import InvalidParametersError, NoConvergenceError, SmoothFactor
from singquad.cutoff import make_standard_cutoff
from singquad.moments import moment_integral
from singquad.oracle import estimate_order, reference_integral


def window(L, n):
    cut = make_standard_cutoff()
    return SmoothFactor(lambda x: cut.profile(np.linalg.norm(x, axis=1) / L), L)


def test_zero_factor(const2):
    zero = make_smooth_factor({"type": "zero"}, 2)
    assert reference_integral(const2, zero, (0.1, 0.0)).value == 0.0


@pytest.mark.parametrize("angular", ["const", "cos_2", "sin_1"])
def test_matches_moment_integral(angular):
    kern = make_kernel({"gamma": -1.0, "angular": angular}, 2)
    ref = reference_integral(kern, window(1.5, 2), (0.0, 0.0), 1e-12)
    want = moment_integral(kern, (0, 0), make_standard_cutoff(), 1.5)
    assert ref.value == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_refinement_schedules_agree(const1):
    v = make_smooth_factor({"type": "window"}, 1)
    a = reference_integral(const1, v, (0.0,), 1e-12)
    b = reference_integral(const1, v, (0.0,), 1e-12, gl_order=16, geometric_levels=20,
                           max_panels=120)
    assert abs(a.value - b.value) < 1e-11


def test_rotation_invariance(const2):
    v = window(1.0, 2)
    x0 = np.array([0.2, 0.1])
    base = reference_integral(const2, v, x0, 1e-11).value
    t = 0.7
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    turned = reference_integral(const2, v, rot @ x0, 1e-11).value
    assert turned == pytest.approx(base, rel=1e-9)


def test_halving_tolerance(const2, bump2):
    loose = reference_integral(const2, bump2, (0.013, -0.021), 1e-9)
    tight = reference_integral(const2, bump2, (0.013, -0.021), 5e-10)
    assert abs(tight.value - loose.value) <= loose.error_estimate + 1e-15


def test_three_dimensions():
    kern = make_kernel({"gamma": -2.0}, 3)
    ref = reference_integral(kern, window(1.0, 3), (0.0, 0.0, 0.0), 1e-11)
    want = moment_integral(kern, (0, 0, 0), make_standard_cutoff(), 1.0)
    assert ref.value == pytest.approx(want, rel=1e-10)


def test_failure_reports_best_value(const2, bump2):
    with pytest.raises(NoConvergenceError) as info:
        reference_integral(const2, bump2, (0.01, 0.02), 1e-15, max_level=1)
    assert info.value.best is not None
    with pytest.raises(InvalidParametersError):
        reference_integral(const2, bump2, (0.0,))


def test_estimate_order_examples():
    assert estimate_order([(0.1, 1e-2), (0.05, 2.5e-3)]) == [pytest.approx(2.0)]
    assert estimate_order([(0.1, 1e-3), (0.05, 1e-3)]) == [0.0]
    assert estimate_order([(0.1, 1e-3), (0.05, 0.0), (0.025, 1e-5)]) == [None, None]
    with pytest.raises(InvalidParametersError):
        estimate_order([(0.1, 1.0)])
    with pytest.raises(InvalidParametersError):
        estimate_order([(0.05, 1.0), (0.1, 1.0)])
