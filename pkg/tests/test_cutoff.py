import math

import numpy as np
import pytest

from singquad.core import InvalidParametersError
from singquad.cutoff import eval_window, make_standard_cutoff, smooth_step


@pytest.fixture
def wide_cut():
    return make_standard_cutoff(0.75, 1.0)


def test_profile_examples(wide_cut):
    assert wide_cut.profile(0.0) == 1.0
    assert wide_cut.profile(1.0) == 0.0
    assert wide_cut.profile(0.875) == pytest.approx(0.5, abs=1e-15)


def test_eval_window_examples(wide_cut):
    assert eval_window(wide_cut, 2.0, [1.4, 0.0]) == 1.0
    assert eval_window(wide_cut, 2.0, [0.0, 2.1]) == 0.0
    assert eval_window(wide_cut, 1.0, [0.875]) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(InvalidParametersError):
        eval_window(wide_cut, 0.0, [0.1])


def test_bad_parameters():
    for a, b in [(1.0, 1.0), (0.0, 1.0), (0.9, 0.5)]:
        with pytest.raises(InvalidParametersError):
            make_standard_cutoff(a, b)


def test_closed_form_and_symmetry():
    t = np.linspace(0.01, 0.99, 41)
    e = np.exp(-1 / t)
    f = np.exp(-1 / (1 - t))
    np.testing.assert_allclose(smooth_step(t), e / (e + f), rtol=1e-15)
    np.testing.assert_allclose(smooth_step(t) + smooth_step(1 - t), 1.0, rtol=1e-15)


@pytest.mark.parametrize("a, b", [(0.25, 1.0), (0.75, 1.0), (0.5, 2.0)])
def test_plateau_support_monotone(a, b):
    c = make_standard_cutoff(a, b)
    r = np.linspace(0, 1.2 * b, 2001)
    vals = c.profile(r)
    assert np.all(vals[r <= a] == 1.0) and np.all(vals[r >= b] == 0.0)
    assert np.all(np.diff(vals) <= 0.0)


def test_derivatives_bounded_under_refinement():
    c = make_standard_cutoff(0.25, 1.0)
    x = np.linspace(0.2, 1.05, 60)
    for k in range(1, 7):
        coef = np.array([(-1) ** j * math.comb(k, j) for j in range(k + 1)])
        peaks = []
        for delta in (4e-3, 2e-3, 1e-3):
            shifts = (k / 2 - np.arange(k + 1)) * delta
            est = sum(cj * c.profile(x + s) for cj, s in zip(coef, shifts)) / delta ** k
            peaks.append(np.max(np.abs(est)))
        assert np.all(np.isfinite(peaks))
        assert peaks[-1] < 1.5 * peaks[0] + 1.0


def test_window_radial_symmetry(rng):
    c = make_standard_cutoff()
    for n in (2, 3):
        x = rng.normal(size=(50, n))
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        np.testing.assert_allclose(eval_window(c, 1.3, x), eval_window(c, 1.3, x @ q.T),
                                   rtol=1e-13, atol=1e-15)
