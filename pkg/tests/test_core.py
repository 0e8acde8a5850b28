import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from singquad.core import (
    GridContext,
    InsufficientExpansionError,
    InvalidParametersError,
    MultiIndex,
    SingularKernel,
    SmoothFactor,
    enumerate_multi_indices,
    pi_count,
    split_singularity,
)


@pytest.mark.parametrize("p, n, expected", [(3, 1, 4), (2, 2, 6), (0, 3, 1)])
def test_pi_count_examples(p, n, expected):
    assert pi_count(p, n) == expected


def test_pi_count_matches_enumeration():
    for n in (1, 2, 3):
        for p in range(9):
            idx = enumerate_multi_indices(p, n)
            assert len(idx) == pi_count(p, n) == math.comb(p + n, n)
            assert len(set(idx)) == len(idx)


def test_enumeration_order():
    assert enumerate_multi_indices(1, 2) == [(0, 0), (0, 1), (1, 0)]
    assert enumerate_multi_indices(2, 1) == [(0,), (1,), (2,)]
    orders = [nu.order for nu in enumerate_multi_indices(4, 3)]
    assert orders == sorted(orders)


def test_multi_index_basics():
    nu = MultiIndex((2, 0, 3))
    assert nu.order == 5
    assert nu.factorial == 12
    assert MultiIndex((20,)).factorial == math.factorial(20)
    x = np.array([[2.0, 5.0, 0.5], [1.0, 1.0, -1.0]])
    np.testing.assert_allclose(nu.monomial(x), [4 * 0.125, -1.0])
    with pytest.raises(InvalidParametersError):
        MultiIndex((1, -1))


def test_split_singularity_examples():
    m, a = split_singularity(0.26, 0.1)
    assert m == (3,) and a[0] == pytest.approx(-0.4)
    assert split_singularity((0.0, 0.0), 0.1) == ((0, 0), (0.0, 0.0))
    m, a = split_singularity(0.25, 0.1)
    assert m == (2,) and a[0] == pytest.approx(0.5)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=3),
       st.floats(1e-3, 0.9))
def test_split_singularity_reassembles(x0, h):
    m, alpha = split_singularity(x0, h)
    assert max(abs(a) for a in alpha) <= 0.5 + 1e-12
    back = h * (np.asarray(m) + np.asarray(alpha))
    assert np.allclose(back, x0, rtol=1e-14, atol=1e-14 * max(1.0, max(map(abs, x0))))


def test_grid_context_validation():
    GridContext(2, 0.1, (0.5, -0.5), h0=0.5, L=2.0, Lprime=4.0)
    bad = [dict(h=0.0), dict(h=0.6, h0=0.5), dict(h0=1.5), dict(alpha=(0.6, 0.0)),
           dict(L=2.0, Lprime=2.5), dict(L=-5.0)]
    for kw in bad:
        args = dict(n=2, h=0.1, alpha=(0.0, 0.0), h0=0.5, L=2.0, Lprime=math.inf)
        args.update(kw)
        with pytest.raises(InvalidParametersError):
            GridContext(**args)
    with pytest.raises(InvalidParametersError):
        GridContext(4, 0.1)


def test_grid_context_x0_and_stencil_check():
    g = GridContext.from_singularity((0.26, -0.31), 0.1, h0=0.2)
    np.testing.assert_allclose(g.x0, [0.26, -0.31], rtol=1e-14)
    g.check_stencil([(0, 0), (2, 0)])
    with pytest.raises(InvalidParametersError):
        GridContext(2, 0.1, h0=0.5, L=0.5).check_stencil([(0, 0), (2, 0)])


def test_kernel_validation_and_evaluation():
    with pytest.raises(InvalidParametersError):
        SingularKernel(2, -2.0, lambda u: np.ones(len(u)))
    k = SingularKernel(2, -1.0, lambda u: u[:, 0])
    d = np.array([[3.0, 4.0]])
    assert k(d)[0] == pytest.approx(0.6 / 5.0)
    assert k.is_r_independent
    assert k.expansion_term(0).gamma == -1.0 and k.expansion_term(1) is None


def test_expansion_terms():
    full = SingularKernel(2, -1.0, lambda u: np.ones(len(u)),
                          radial_expansion=(lambda u: np.ones(len(u)), None),
                          full=lambda r, u: 1 + r ** 2, kernel_id="k")
    t0 = full.expansion_term(0)
    assert t0.gamma == -1.0 and t0.is_r_independent and t0.kernel_id == "k/phi0"
    assert full.expansion_term(1) is None
    with pytest.raises(InsufficientExpansionError):
        full.expansion_term(2)
    bare = SingularKernel(2, -1.0, lambda u: np.ones(len(u)), full=lambda r, u: r)
    with pytest.raises(InsufficientExpansionError):
        bare.expansion_term(0)


def test_smooth_factor_support_check():
    good = SmoothFactor(lambda x: np.where(np.linalg.norm(x, axis=1) < 1, 1.0, 0.0), 1.0)
    good.check_support(2)
    leaky = SmoothFactor(lambda x: np.ones(len(x)), 1.0, "leaky")
    with pytest.raises(InvalidParametersError):
        leaky.check_support(2)
