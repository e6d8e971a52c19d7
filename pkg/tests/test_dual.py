from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from heavytail_rmt import dual
from heavytail_rmt.numerics import integrate
from heavytail_rmt.rng import RngStream, StreamBlock


@given(y=st.floats(0, 30))
def test_psi_matches_definition(y):
    # 2 e^{y^2/2} int_y^inf standard normal density
    want = 2 * mp.e ** (mp.mpf(y) ** 2 / 2) * mp.ncdf(-y)
    assert dual.psi(y) == pytest.approx(float(want), rel=1e-13)


def test_psi_is_laplace_transform_of_half_normal():
    y = 0.8
    got = integrate(lambda p: math.exp(-y * p) * math.sqrt(2 / math.pi) * math.exp(-p * p / 2), 0).value
    assert dual.psi(y) == pytest.approx(got, rel=1e-12)


def test_psi_large_argument_does_not_overflow():
    assert dual.psi(1e6) == pytest.approx(math.sqrt(2 / math.pi) / 1e6, rel=1e-9)
    assert dual.log_psi(50.0) == pytest.approx(math.log(dual.psi(50.0)))


def test_one_by_one_dual_expectation():
    # E Psi(|s|) over s ~ N(0,1) equals E (1 + a^2)^{-1/2} for a Cauchy, both 2/pi
    dual_side = 2 * integrate(lambda s: dual.psi(s) * math.exp(-s * s / 2) / math.sqrt(2 * math.pi), 0).value
    direct = 2 * integrate(lambda a: (1 + a * a) ** -0.5 / (math.pi * (1 + a * a)), 0).value
    assert dual_side == pytest.approx(2 / math.pi, rel=1e-11)
    assert direct == pytest.approx(2 / math.pi, rel=1e-11)


def test_cauchy_dual_t_zero_is_one():
    v = dual.cauchy_dual_values(StreamBlock(1, np.arange(5)), 10, 10, 0.0)
    assert np.all(v == 1.0)
    with pytest.raises(ValueError):
        dual.cauchy_dual_values(StreamBlock(1, [0]), 2, 2, -1.0)


def test_single_wrappers_match_batches():
    b = dual.cauchy_dual_values(StreamBlock(3, [0, 1], "d"), 4, 3, 0.9)
    s = dual.cauchy_dual_single(4, 3, 0.9, RngStream(3, 1, "d"))
    assert s.value == b[1] and s.route is dual.Route.CAUCHY_SINGLE
    r = dual.rademacher_dual(2, 1.0, RngStream(3, 0, "r"))
    assert r.value == dual.rademacher_dual_values(StreamBlock(3, [0], "r"), 2, 1.0)[0]


def test_sparse_dual_with_full_mask_equals_dense_dual():
    mask = np.ones((5, 4), dtype=bool)
    a = dual.cauchy_dual_sparse_values(StreamBlock(2, np.arange(6), "s"), mask, 1.3)
    b = dual.cauchy_dual_values(StreamBlock(2, np.arange(6), "s"), 5, 4, 1.3)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_sparse_row_count_requires_equal_rows():
    with pytest.raises(ValueError):
        dual.sparse_row_count(np.array([[1, 0], [1, 1]], dtype=bool))


def test_general_r_single_t_gaussian_char_fn():
    # with Gaussian entries and one t, E prod g(t p_j s_k) = E exp(-t^2 |p|^2 |s|^2 / 2)
    blk = StreamBlock(7, np.arange(3), "g")
    got = dual.general_r_dual_values(blk, 3, 2, [0.4], g="gaussian")
    blk2 = StreamBlock(7, np.arange(3), "g")
    s, p = blk2.normal(2), blk2.normal(3)
    want = np.exp(-0.5 * 0.16 * (p**2).sum(1) * (s**2).sum(1))
    np.testing.assert_allclose(got, want, rtol=1e-12)
    with pytest.raises(ValueError):
        dual.general_r_dual_values(blk, 2, 2, [])
    with pytest.raises(ValueError):
        dual.char_fn("levy")


@given(y=st.floats(0, 20))
def test_radial_transform_of_exponential(y):
    assert abs(dual.radial_G("wishart_radial", y).value - math.exp(-y)) <= 1e-10


@pytest.mark.parametrize("y", [1e-4, 0.3, 2.0, 7.5])
def test_radial_transform_gamma2_against_mpmath(y):
    want = float(mp.quad(lambda x: x * mp.e**-x * mp.besselj(0, 2 * mp.sqrt(x * y)), [0, mp.inf]))
    assert dual.radial_G("gamma2_radial", y).value == pytest.approx(want, abs=1e-10)
    assert dual.radial_density("gamma2_radial").G(y) == pytest.approx(want, abs=1e-10)


def test_complex_dual_generic_G_matches_shortcut():
    f = dual.radial_density("wishart_radial")
    a = dual.complex_dual_values(StreamBlock(4, np.arange(5), "c"), 3, 2, 0.8, "wishart_radial")
    b = dual.complex_dual_values(StreamBlock(4, np.arange(5), "c"), 3, 2, 0.8, f.closed_G)
    np.testing.assert_allclose(a, b, rtol=1e-13)


def _det_average(n, t):
    # independent oracle: exact rational enumeration with mpmath determinants
    import itertools
    tot = mp.mpf(0)
    for signs in itertools.product((-1, 1), repeat=n * n):
        R = mp.matrix(n, n)
        for i, s in enumerate(signs):
            R[i // n, i % n] = s
        tot += mp.det(mp.eye(n) + t * t * R.T * R) ** mp.mpf(-0.5)
    return float(tot / 2 ** (n * n))


@pytest.mark.parametrize("n,t", [(1, 0.7), (2, 1.0), (2, 0.5), (3, 0.5)])
def test_rademacher_bruteforce(n, t):
    assert dual.rademacher_bruteforce(n, t) == pytest.approx(_det_average(n, t), rel=1e-13)


def test_rademacher_bruteforce_known_value_and_limits():
    assert dual.rademacher_bruteforce(2, 1.0) == pytest.approx(0.3902734644166457, rel=1e-14)
    with pytest.raises(ValueError):
        dual.rademacher_bruteforce(5, 1.0)
