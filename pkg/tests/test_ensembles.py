from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heavytail_rmt.ensembles import (EnsembleSpec, InvalidSpec, Kind, draw_entries, sample_matrix,
                                     sample_radial_complex, sample_sparse_mask)
from heavytail_rmt.dual import radial_density
from heavytail_rmt.rng import RngStream, StreamBlock


@st.composite
def specs(draw):
    kind = draw(st.sampled_from(list(Kind)))
    n = draw(st.integers(1, 12))
    m = n if kind is Kind.RADEMACHER else draw(st.integers(n, 20))
    b = draw(st.integers(1, n)) if kind is Kind.CAUCHY_SPARSE else None
    relaxed = draw(st.booleans()) if kind is Kind.CAUCHY_SPARSE else False
    return EnsembleSpec(kind, m, n, b, relaxed, draw(st.integers(0, 2**64 - 1)))


@given(specs())
def test_spec_json_round_trip(spec):
    assert EnsembleSpec.from_json(spec.to_json()) == spec


@pytest.mark.parametrize("kw", [
    dict(kind="cauchy_full", m=2, n=3),
    dict(kind="cauchy_sparse", m=3, n=3),
    dict(kind="cauchy_sparse", m=3, n=3, b=4),
    dict(kind="cauchy_sparse", m=3, n=3, b=0),
    dict(kind="cauchy_full", m=3, n=3, b=1),
    dict(kind="cauchy_full", m=3, n=3, bernoulli_relaxed=True),
    dict(kind="rademacher", m=4, n=3),
    dict(kind="cauchy_full", m=3, n=3, seed=2**64),
])
def test_invalid_specs_rejected(kw):
    with pytest.raises(InvalidSpec):
        EnsembleSpec(**kw)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(InvalidSpec):
        EnsembleSpec.from_dict({"kind": "cauchy_full", "m": 2, "n": 2, "foo": 1})


def test_cauchy_half_exceed_one():
    a = draw_entries(Kind.CAUCHY_FULL, 1000, 1000, StreamBlock(1, [0], "c"))
    freq = np.mean(np.abs(a) > 1)
    assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / a.size)


@given(m=st.integers(1, 15), extra=st.integers(0, 5), b=st.integers(1, 15), seed=st.integers(0, 1000))
def test_exact_mask_row_and_column_modes(m, extra, b, seed):
    n = max(1, min(m, b + extra))
    m = max(m, n)
    b = min(b, n)
    mask = sample_sparse_mask(m, n, b, False, RngStream(seed, 0, "mask"))
    assert mask.shape == (m, n)
    assert np.all(mask.sum(axis=1) == b)
    cmask = sample_sparse_mask(m, n, b, False, RngStream(seed, 0, "mask"), axis="column")
    assert np.all(cmask.sum(axis=0) == b)


def test_full_mask_when_b_equals_n():
    assert sample_sparse_mask(7, 5, 5, False, RngStream(0)).all()


def test_mask_errors():
    with pytest.raises(InvalidSpec):
        sample_sparse_mask(5, 5, 6, False, RngStream(0))
    with pytest.raises(ValueError):
        sample_sparse_mask(5, 5, 2, False, RngStream(0), axis="diag")


def test_mask_positions_uniform():
    hits = np.zeros(8)
    for s in range(400):
        hits += sample_sparse_mask(4, 8, 2, False, RngStream(s, 0, "mask")).sum(axis=0)
    expected = 400 * 4 * 2 / 8
    assert np.all(np.abs(hits - expected) < 5 * np.sqrt(expected))


def test_relaxed_mask_density():
    mask = sample_sparse_mask(400, 200, 50, True, RngStream(2))
    p = mask.mean()
    assert abs(p - 0.25) < 4 * np.sqrt(0.25 * 0.75 / mask.size)


def test_sparse_sample_zero_off_mask():
    spec = EnsembleSpec("cauchy_sparse", 6, 5, b=2, seed=3)
    s = sample_matrix(spec, RngStream(3, 0, "m"))
    assert np.all(s.entries[~s.mask] == 0)
    assert np.all(s.entries[s.mask] != 0)


def test_sample_matrix_is_batched_row():
    spec = EnsembleSpec("cauchy_full", 4, 3)
    single = sample_matrix(spec, RngStream(5, 2, "m")).entries
    batch = draw_entries(Kind.CAUCHY_FULL, 4, 3, StreamBlock(5, [0, 1, 2], "m"))
    np.testing.assert_array_equal(single, batch[2])


def test_gaussian_ensembles_normalisation():
    blk = StreamBlock(4, np.arange(20), "g")
    z = draw_entries(Kind.WISHART_COMPLEX, 50, 50, blk)
    assert abs(np.mean(np.abs(z) ** 2) - 1) < 0.02
    assert abs(np.var(z.real) - 0.5) < 0.02
    x = draw_entries(Kind.WISHART_REAL, 50, 50, blk)
    assert abs(np.var(x) - 1) < 0.03
    r = draw_entries(Kind.RADEMACHER, 10, 10, blk)
    assert set(np.unique(r)) == {-1.0, 1.0}


def test_radial_complex_moduli():
    z = sample_radial_complex(30, 30, radial_density("gamma2_radial"), StreamBlock(1, np.arange(10), "r"))
    assert abs(np.mean(np.abs(z) ** 2) - 2.0) < 0.05
    assert abs(np.mean(z)) < 0.05
