from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from heavytail_rmt import wishart


def _real_oracle(n, m, t):
    # E over the Gaussian vector s in R^n of (1 + t^2 |s|^2)^{-m/2}, in the radial variable
    f = lambda r: mp.e ** (-r * r / 2) * r ** (n - 1) * (1 + t * t * r * r) ** (-mp.mpf(m) / 2)
    return float(mp.quad(f, [0, 1, mp.inf]) / (2 ** (mp.mpf(n) / 2 - 1) * mp.gamma(mp.mpf(n) / 2)))


def test_real_one_by_one_closed_form():
    # E (1 + s^2)^{-1/2} = e^{1/4} K0(1/4) / sqrt(2 pi)
    want = float(mp.e**0.25 * mp.besselk(0, 0.25) / mp.sqrt(2 * mp.pi))
    assert wishart.wishart_real_det_integral(1, 1, 1.0).value == pytest.approx(want, rel=1e-14)


def _complex_oracle(n, m, t):
    f = lambda u: u ** (n - 1) * mp.e**-u * (1 + t * t * u) ** (-m)
    return float(mp.quad(f, [0, 1, mp.inf]) / mp.gamma(n))


def test_complex_one_by_one_is_e_times_E1():
    assert wishart.wishart_complex_det_integral(1, 1, 1.0).value == pytest.approx(
        float(mp.e * mp.e1(1)), rel=1e-14)


@pytest.mark.parametrize("n,m,t", [(1, 1, 1.0), (2, 3, 0.8), (4, 4, 0.3), (3, 7, 2.0), (6, 6, 1.0)])
def test_real_and_complex_against_mpmath(n, m, t):
    assert wishart.wishart_real_det_integral(n, m, t).value == pytest.approx(_real_oracle(n, m, t), rel=1e-12)
    assert wishart.wishart_complex_det_integral(n, m, t).value == pytest.approx(_complex_oracle(n, m, t), rel=1e-12)


def test_monte_carlo_cross_check_real():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((200_000, 3, 2))
    s = np.linalg.svd(a, compute_uv=False) ** 2
    v = np.prod((1 + 0.49 * s) ** -0.5, axis=1)
    q = wishart.wishart_real_det_integral(2, 3, 0.7).value
    assert abs(v.mean() - q) < 4 * v.std() / math.sqrt(len(v))


def test_scaled_and_edge_cases():
    a = wishart.wishart_real_det_integral(4, 4, 1.0, scaled=True).value
    b = wishart.wishart_real_det_integral(4, 4, 0.5).value
    assert a == pytest.approx(b, rel=1e-13)
    assert wishart.wishart_complex_det_integral(3, 3, 0.0).value == 1.0
    with pytest.raises(ValueError):
        wishart.wishart_real_det_integral(3, 2, 1.0)
    with pytest.raises(ValueError):
        wishart.wishart_complex_det_integral(2, 2, -1.0)


def test_large_n_log_value_survives_underflow():
    q = wishart.wishart_real_det_integral(3000, 3000, 5.0)
    assert q.value == 0.0 and math.isfinite(q.log_value)
    q2 = wishart.wishart_real_det_integral(800, 800, 1.0, scaled=True)
    assert q2.log_value / 800 == pytest.approx(
        wishart.mp_log_integral(1.0, wishart.MPParams()).value, abs=2e-3)


@given(m=st.integers(1, 6), dn=st.integers(0, 5), z=st.floats(0.01, 50))
def test_real_complex_identity(m, dn, z):
    n = max(1, m - dn)
    assert wishart.lemma1_residual(m, n, z) < 1e-10


def test_lemma1_rejects_bad_z():
    with pytest.raises(ValueError):
        wishart.lemma1_residual(2, 2, 0.0)


@given(t=st.floats(0, 1e3))
def test_saddle_solves_its_equation(t):
    sd = wishart.saddle(t)
    assert 0 < sd.z_star <= 1
    assert t * t * sd.z_star**2 + sd.z_star - 1 == pytest.approx(0, abs=1e-12)
    assert sd.second_deriv == pytest.approx(math.sqrt(4 * t * t + 1), rel=1e-9)


def test_saddle_limit_and_golden_ratio():
    assert wishart.saddle(0.0).z_star == 1.0
    assert wishart.saddle(1.0).z_star == pytest.approx((math.sqrt(5) - 1) / 2, rel=1e-15)


def test_steepest_descent_converges():
    errs = []
    for n in (25, 50, 100, 200, 400):
        q = wishart.wishart_real_det_integral(n, n, 1.0, scaled=True)
        errs.append(abs(math.exp(wishart.steepest_descent_log(n, 1.0) - q.log_value) - 1))
    assert errs[2] < 0.05
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # first-order error: halving 1/n halves the error
    assert errs[3] / errs[2] == pytest.approx(0.5, abs=0.02)
    assert wishart.steepest_descent_value(10, 1.0) == pytest.approx(math.exp(wishart.steepest_descent_log(10, 1.0)))


@pytest.mark.parametrize("gamma", [1.0, 2.0, 4.0])
def test_mp_density_normalised(gamma):
    assert wishart.mp_normalization(wishart.MPParams(gamma)).value == pytest.approx(1.0, abs=1e-10)


def test_mp_density_support_and_values():
    p = wishart.MPParams(2.0, 1.5)
    assert wishart.mp_density(p.a * 0.99, p) == 0.0
    assert wishart.mp_density(p.b * 1.01, p) == 0.0
    x = 0.5 * (p.a + p.b)
    want = 2.0 / (2 * math.pi * x * 1.5) * math.sqrt((p.b - x) * (x - p.a))
    assert wishart.mp_density(x, p) == pytest.approx(want, rel=1e-14)
    with pytest.raises(ValueError):
        wishart.MPParams(0.5)


def test_mp_log_integral_against_mpmath():
    b = 4.0
    want = -0.5 * float(mp.quad(lambda x: mp.log(1 + x) * mp.sqrt((b - x) * x) / (2 * mp.pi * x), [0, b]))
    assert wishart.mp_log_integral(1.0, wishart.MPParams()).value == pytest.approx(want, rel=1e-11)
    assert wishart.mp_log_integral(0.0, wishart.MPParams()).value == 0.0


def test_richardson_removes_polynomial_terms():
    ns = [200, 400, 800]
    vals = [1.5 + 3 / n - 7 / n**2 for n in ns]
    assert wishart.richardson_limit(ns, vals) == pytest.approx(1.5, abs=1e-10)


def _bessel_oracle(x, y, a):
    J = lambda u: mp.besselj(a, u)
    dJ = lambda u: mp.diff(J, u)
    ux, uy = 2 * mp.sqrt(x), 2 * mp.sqrt(y)
    return float((J(ux) * mp.sqrt(y) * dJ(uy) - J(uy) * mp.sqrt(x) * dJ(ux)) / (x - y))


@pytest.mark.parametrize("x,y,a", [(1.0, 2.0, 0.0), (0.3, 5.0, 1.0), (4.0, 4.5, 2.5)])
def test_bessel_kernel_off_diagonal(x, y, a):
    assert wishart.bessel_kernel(x, y, a) == pytest.approx(_bessel_oracle(x, y, a), rel=1e-10)


@pytest.mark.parametrize("x,a", [(1.0, 0.0), (3.0, 1.0), (0.2, 2.0)])
def test_bessel_kernel_diagonal_is_limit(x, a):
    mp.mp.dps = 40
    try:
        want = _bessel_oracle(mp.mpf(x), mp.mpf(x) + mp.mpf("1e-25"), a)
    finally:
        mp.mp.dps = 15
    assert wishart.bessel_kernel(x, x, a) == pytest.approx(want, rel=1e-10)
    assert wishart.bessel_kernel(x, x * (1 + 1e-8), a) == pytest.approx(want, rel=1e-8)
    with pytest.raises(ValueError):
        wishart.bessel_kernel(0.0, 1.0)


def test_clt_hook_not_implemented():
    with pytest.raises(NotImplementedError):
        wishart.clt_variance_hook(1.0)
