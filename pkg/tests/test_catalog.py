import math

import numpy as np
import pytest

from singquad.catalog import make_kernel, make_smooth_factor, numeric_expansion
from singquad.core import InvalidParametersError


def unit(t):
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def test_angular_profiles():
    t = np.array([0.3, 1.7, -2.2])
    u = unit(t)
    assert np.allclose(make_kernel({"gamma": -1, "angular": "cos_3"}, 2).angular(u), np.cos(3 * t))
    assert np.allclose(make_kernel({"gamma": -1, "angular": "sin_2"}, 2).angular(u), np.sin(2 * t))
    mixed = make_kernel({"gamma": -1, "angular": {"harmonics": [[0, 1.0, 0.0], [2, 0.5, -0.25]]}},
                        2)
    assert np.allclose(mixed.angular(u), 1 + 0.5 * np.cos(2 * t) - 0.25 * np.sin(2 * t))
    assert make_kernel({"gamma": -0.5, "angular": "sign"}, 1).angular(np.array([[-1.0]]))[0] == -1
    for bad in ["sign", "tan_2", {"foo": 1}]:
        with pytest.raises(InvalidParametersError):
            make_kernel({"gamma": -1, "angular": bad}, 2)
    with pytest.raises(InvalidParametersError):
        make_kernel({"angular": "const"}, 2)


def test_radial_expansions():
    k = make_kernel({"gamma": -1, "radial": {"type": "exp", "rate": 2.0}}, 2)
    u = unit(np.array([0.4]))
    for j in range(4):
        assert k.radial_expansion[j](u)[0] == pytest.approx(2.0 ** j / math.factorial(j))
    assert k.kernel_id == "const*exp(2r)"
    poly = make_kernel({"gamma": -1, "radial": {"type": "poly", "coeffs": [1.0, 0.0, 3.0]}}, 2)
    assert poly.radial_expansion[1] is None and poly.expansion_term(1) is None
    assert poly.expansion_term(2).gamma == 1.0
    assert poly.full(np.array([2.0]), u)[0] == 13.0


def test_numeric_expansion_matches_exact():
    exact = make_kernel({"gamma": -1, "radial": {"type": "exp", "rate": 1.0}}, 2)
    approx = make_kernel({"gamma": -1, "radial": {"type": "exp", "rate": 1.0},
                          "expansion": "numeric"}, 2)
    assert approx.kernel_id.endswith("~numeric")
    u = unit(np.linspace(0, 6, 7))
    for j in range(3):
        assert np.allclose(approx.radial_expansion[j](u), exact.radial_expansion[j](u), atol=1e-6)
    phis = numeric_expansion(lambda r, u: 1 + r + r ** 2, 3)
    assert np.allclose(phis[2](u), 1.0, atol=1e-6)


def test_smooth_factors():
    for desc in ({"type": "window"}, {"type": "window_exp", "rate": [1.0, 0.5]},
                 {"type": "window_poly", "terms": [[[1, 1], 2.0]], "center": [0.2, 0.0],
                  "radius": 0.5}):
        v = make_smooth_factor(desc, 2)
        v.check_support(2)
    v = make_smooth_factor({"type": "window", "center": [0.3, 0.4], "radius": 2.0}, 2)
    assert v.support_radius == pytest.approx(2.5)
    assert v(np.array([[0.3, 0.4]]))[0] == 1.0
    assert make_smooth_factor({"type": "zero"}, 1)(np.zeros((3, 1))).tolist() == [0, 0, 0]
    for bad in ({"type": "blob"}, {"type": "window", "radius": -1},
                {"type": "window", "center": [0.0]}):
        with pytest.raises(InvalidParametersError):
            make_smooth_factor(bad, 2)
    with pytest.raises(InvalidParametersError):
        make_smooth_factor({"type": "window_poly", "terms": [[[1], 1.0]]}, 2)
