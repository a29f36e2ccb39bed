"""Distributional checks for the exact Polya-Gamma sampler.

The identity PG(b, z) = sum of b independent PG(1, z) and the closed-form
mean/Laplace transform give independent oracles; everything here is
moment-matching at modest sample sizes (the tight 1e6-draw version lives in
the acceptance suite).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnppc.pg import PgParams, pg_laplace, pg_mean, sample_pg, sample_pg_array


def test_pg_mean_formula_limit():
    # z -> 0 limit is b/4; the generic formula must agree just off zero
    assert pg_mean(PgParams(3, 0.0)) == 0.75
    assert math.isclose(pg_mean(PgParams(3, 1e-7)), 0.75, rel_tol=1e-9)
    assert math.isclose(pg_mean(PgParams(1, 2.0)), math.tanh(1.0) / 4.0, rel_tol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        PgParams(0, 1.0)
    with pytest.raises(ValueError):
        PgParams(2, float("nan"))
    with pytest.raises(ValueError):
        sample_pg_array(np.array([1, 0]), np.array([0.0, 0.0]), np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_pg_array(np.array([1]), np.array([np.inf]), np.random.default_rng(0))


@pytest.mark.parametrize("b,z", [(1, 0.0), (1, 2.0), (2, 1.0), (4, -3.0)])
def test_sample_mean_matches_analytic(b, z):
    rng = np.random.default_rng(2024)
    n = 40000
    draws = sample_pg_array(np.full(n, b, dtype=np.int64), np.full(n, z), rng)
    se = draws.std() / math.sqrt(n)
    assert abs(draws.mean() - pg_mean(PgParams(b, z))) < 4 * se


def test_laplace_transform():
    rng = np.random.default_rng(7)
    n = 60000
    for b, z in [(1, 0.0), (2, 1.5)]:
        draws = sample_pg_array(np.full(n, b, dtype=np.int64), np.full(n, z), rng)
        for t in (0.5, 2.0):
            vals = np.exp(-draws * t)
            se = vals.std() / math.sqrt(n)
            assert abs(vals.mean() - pg_laplace(b, z, t)) < 4 * se


def test_scalar_and_array_agree_in_law():
    # not stream-identical (different call order), but same first moment
    rng = np.random.default_rng(11)
    scalar = np.array([sample_pg(PgParams(2, 1.0), rng) for _ in range(20000)])
    arr = sample_pg_array(
        np.full(20000, 2, dtype=np.int64), np.full(20000, 1.0), np.random.default_rng(12)
    )
    se = math.hypot(scalar.std(), arr.std()) / math.sqrt(20000)
    assert abs(scalar.mean() - arr.mean()) < 4 * se


def test_reproducible_stream():
    b = np.array([1, 2, 3, 1], dtype=np.int64)
    z = np.array([0.0, -1.0, 2.5, 10.0])
    first = sample_pg_array(b, z, np.random.default_rng(99))
    second = sample_pg_array(b, z, np.random.default_rng(99))
    assert np.array_equal(first, second)


def test_tilt_symmetry():
    # PG(b, z) and PG(b, -z) are the same distribution
    rng = np.random.default_rng(21)
    n = 30000
    pos = sample_pg_array(np.ones(n, dtype=np.int64), np.full(n, 1.7), rng)
    neg = sample_pg_array(np.ones(n, dtype=np.int64), np.full(n, -1.7), rng)
    se = math.hypot(pos.std(), neg.std()) / math.sqrt(n)
    assert abs(pos.mean() - neg.mean()) < 4 * se


@settings(max_examples=25, deadline=None)
@given(
    b=st.integers(min_value=1, max_value=5),
    z=st.floats(min_value=-30, max_value=30, allow_nan=False),
)
def test_draws_positive_and_finite(b, z):
    draws = sample_pg_array(
        np.full(64, b, dtype=np.int64), np.full(64, z), np.random.default_rng(abs(hash((b, round(z, 3)))) % 2**32)
    )
    assert np.all(draws > 0) and np.all(np.isfinite(draws))
    # crude envelope: a PG(b,z) variate is dominated by its z=0 version
    assert draws.mean() < 2.0 * b
