from __future__ import annotations

import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from heavytail_rmt import poisson
from heavytail_rmt.rng import RngStream, StreamBlock


def _head_closed_form(z, eps):
    # int_0^eps ((1+zx)^{-1/2} - 1) x^{-3/2}/pi dx
    r = cmath.sqrt(1 + z * eps)
    return -2 * z * math.sqrt(eps) / (math.pi * (1 + r))


@given(zr=st.floats(0.01, 50), zi=st.floats(-50, 50), eps=st.floats(1e-10, 1e-1))
def test_truncation_correction_closed_form(zr, zi, eps):
    z = complex(zr, zi)
    got = poisson.truncation_correction(z, eps)
    assert abs(got - cmath.exp(_head_closed_form(z, eps))) <= 1e-11


@given(z=st.floats(0.05, 20))
def test_head_plus_tail_is_full_integral(z):
    eps = 1e-3
    total = poisson.head_integral(z, eps).value + poisson.tail_integral(z, eps).value
    assert abs(total - (-2 / math.pi) * math.sqrt(z)) <= 1e-9


def test_expectation_principal_branch():
    assert poisson.poisson_det_expectation(1.0).real == pytest.approx(0.5290778082677353, rel=1e-15)
    z = 1 + 2j
    want = complex(mp.exp(-2 / mp.pi * mp.sqrt(mp.mpc(1, 2))))
    assert abs(poisson.poisson_det_expectation(z) - want) < 1e-15
    with pytest.raises(ValueError):
        poisson.poisson_det_expectation(-1)


def test_point_from_uniform_and_tail_mass():
    assert poisson.point_from_uniform(0.5, 1.0) == 4.0
    assert poisson.tail_mass(4.0) == pytest.approx(1 / math.pi)
    # tail mass equals the integral of the intensity
    assert float(mp.quad(lambda x: 1 / (mp.pi * x**1.5), [2, mp.inf])) == pytest.approx(poisson.tail_mass(2))
    with pytest.raises(ValueError):
        poisson.point_from_uniform(1.0, 1.0)
    with pytest.raises(ValueError):
        poisson.tail_mass(0)


def test_single_and_batched_samplers_agree():
    blk = StreamBlock(4, np.arange(3), "p")
    batch = poisson.sample_process_block(blk, 1e-3)
    single = poisson.sample_process(1e-3, RngStream(4, 2, "p"))
    np.testing.assert_array_equal(single.points, batch[2].points)
    assert np.all(np.diff(single.points) <= 0) and np.all(single.points > 1e-3)
    logs = poisson.process_log_det_values(StreamBlock(4, np.arange(3), "p"), 1e-3, 1.0)
    for s, v in zip(batch, logs):
        assert v == pytest.approx(-0.5 * np.log1p(s.points).sum(), rel=1e-12)


def _samples(cut, R, seed):
    return poisson.sample_process_block(StreamBlock(seed, np.arange(R), "prop"), cut)


@pytest.mark.parametrize("x", [0.25, 1.0, 9.0])
def test_void_probability(x):
    R = 20_000
    samples = _samples(1e-3, R, 1)
    empty = np.mean([not np.any(s.points > x) for s in samples])
    want = math.exp(-poisson.tail_mass(x))
    assert abs(empty - want) <= 3 * math.sqrt(want * (1 - want) / R)


@pytest.mark.parametrize("lo,hi", [(0.01, 0.1), (0.1, 1.0), (1.0, 10.0)])
def test_restriction_consistency(lo, hi):
    # counts of the eps-process in (lo, hi) are Poisson with mean int rho
    R = 20_000
    c = np.array([np.count_nonzero((s.points > lo) & (s.points <= hi)) for s in _samples(1e-3, R, 2)])
    mu = poisson.tail_mass(lo) - poisson.tail_mass(hi)
    assert abs(c.mean() - mu) <= 3 * math.sqrt(mu / R)
    assert abs(c.var() - mu) <= 6 * math.sqrt(2 * mu * mu / R + mu / R)


def test_coarser_cutoff_is_restriction():
    # restricting the 1e-4 process above 1e-2 has the law of the 1e-2 process
    fine = _samples(1e-4, 10_000, 3)
    coarse = _samples(1e-2, 10_000, 4)
    mf = np.array([s.points[s.points > 1e-2].max(initial=0.0) for s in fine])
    mc = np.array([s.maximum for s in coarse])
    from scipy import stats
    assert stats.ks_2samp(mf, mc).pvalue > 1e-3


def test_max_point_law():
    R = 50_000
    mx = poisson.max_point_values(StreamBlock(5, np.arange(R), "mx"), 1e-8)
    for x in (0.5, 2.0, 10.0):
        p = np.mean(mx <= x)
        want = poisson.frechet_rightmost_cdf(x)
        assert abs(p - want) <= 3.5 * math.sqrt(want * (1 - want) / R)


def test_truncated_estimator_small_run():
    R = 4_000
    vals = np.exp(poisson.process_log_det_values(StreamBlock(6, np.arange(R), "e"), 1e-4, 1.0))
    est = vals.mean() * poisson.truncation_correction(1.0, 1e-4).real
    assert abs(est - math.exp(-2 / math.pi)) <= 3.5 * vals.std() / math.sqrt(R)


def test_csv_and_cdfs():
    samples = [poisson.PoissonSample(1.0, np.array([3.0, 2.0])), poisson.PoissonSample(1.0, np.array([]))]
    assert poisson.samples_to_csv(samples).splitlines() == ["replica_id,point", "0,3.0", "0,2.0"]
    assert samples[1].maximum == 0.0
    assert poisson.max_entry_cdf(1.0) == pytest.approx(math.exp(-2 / math.pi))
    with pytest.raises(ValueError):
        poisson.frechet_rightmost_cdf(0.0)
