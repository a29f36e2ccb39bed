"""Similarity matrices, Binder loss, stochastic search vs exhaustive truth."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnppc.partition import (
    SimilarityMatrix,
    adjusted_rand_index,
    binder_expected_loss,
    posterior_similarity,
    search_optimal_partition,
)

from conftest import rgs_partitions


def _psm_from_draws(rng, n, n_draws):
    draws = np.stack([
        np.unique(rng.integers(0, rng.integers(1, n + 1), size=n), return_inverse=True)[1]
        for _ in range(n_draws)
    ])
    return draws


def test_similarity_matrix_validation():
    with pytest.raises(ValueError):
        SimilarityMatrix(np.array([[1.0, 0.5], [0.4, 1.0]]))  # asymmetric
    with pytest.raises(ValueError):
        SimilarityMatrix(np.array([[1.0, 1.2], [1.2, 1.0]]))  # out of range
    with pytest.raises(ValueError):
        SimilarityMatrix(np.array([[0.9, 0.2], [0.2, 1.0]]))  # diagonal


def test_posterior_similarity_counts_pairs():
    draws = np.array([[0, 0, 1], [0, 1, 1], [0, 0, 0], [0, 1, 0]])
    psm = posterior_similarity(draws).psm
    assert psm[0, 1] == 0.5
    assert psm[1, 2] == 0.5
    assert psm[0, 2] == 0.5
    np.testing.assert_array_equal(np.diag(psm), 1.0)


def test_posterior_similarity_threaded_equals_serial():
    rng = np.random.default_rng(0)
    draws = _psm_from_draws(rng, 40, 500)
    a = posterior_similarity(draws, n_threads=1).psm
    b = posterior_similarity(draws, n_threads=4).psm
    np.testing.assert_array_equal(a, b)


def test_binder_loss_definition():
    rng = np.random.default_rng(3)
    draws = _psm_from_draws(rng, 6, 20)
    sm = posterior_similarity(draws)
    cand = np.array([0, 0, 1, 1, 2, 0])
    same = cand[:, None] == cand[None, :]
    manual = 0.0
    for i in range(6):
        for j in range(i + 1, 6):
            manual += abs(float(same[i, j]) - sm.psm[i, j])
    assert np.isclose(binder_expected_loss(cand, sm), manual, rtol=1e-12)


def test_search_matches_exhaustive_small():
    rng = np.random.default_rng(42)
    for inst in range(20):
        n = int(rng.integers(4, 8))
        sm = posterior_similarity(_psm_from_draws(rng, n, int(rng.integers(3, 10))))
        exact = min(binder_expected_loss(p, sm) for p in rgs_partitions(n))
        found = search_optimal_partition(sm, rng=np.random.default_rng(inst))
        assert np.isclose(binder_expected_loss(found, sm), exact, atol=1e-10)


def test_search_deterministic_given_rng():
    rng = np.random.default_rng(5)
    sm = posterior_similarity(_psm_from_draws(rng, 25, 60))
    a = search_optimal_partition(sm, rng=np.random.default_rng(11))
    b = search_optimal_partition(sm, rng=np.random.default_rng(11))
    np.testing.assert_array_equal(a, b)


def test_search_returns_canonical_labels():
    rng = np.random.default_rng(9)
    sm = posterior_similarity(_psm_from_draws(rng, 15, 40))
    labels = search_optimal_partition(sm, rng=np.random.default_rng(0))
    seen = []
    for lab in labels:
        if lab not in seen:
            seen.append(lab)
    assert seen == list(range(len(seen)))


def test_search_respects_max_clusters():
    rng = np.random.default_rng(2)
    sm = posterior_similarity(_psm_from_draws(rng, 12, 30))
    labels = search_optimal_partition(sm, max_clusters=2, rng=np.random.default_rng(1))
    assert labels.max() + 1 <= 2


def test_more_restarts_never_worse():
    rng = np.random.default_rng(31)
    sm = posterior_similarity(_psm_from_draws(rng, 20, 15))
    few = search_optimal_partition(sm, n_restarts=1, rng=np.random.default_rng(7))
    many = search_optimal_partition(sm, n_restarts=16, rng=np.random.default_rng(7))
    assert binder_expected_loss(many, sm) <= binder_expected_loss(few, sm) + 1e-12


def test_identity_psm_recovers_itself():
    # psm that IS a partition: loss 0 at that partition
    truth = np.array([0, 0, 1, 1, 1, 2])
    psm = (truth[:, None] == truth[None, :]).astype(float)
    labels = search_optimal_partition(SimilarityMatrix(psm), rng=np.random.default_rng(0))
    assert adjusted_rand_index(labels, truth) == 1.0
    assert binder_expected_loss(labels, SimilarityMatrix(psm)) == 0.0


def test_adjusted_rand_index_known_values():
    a = np.array([0, 0, 1, 1])
    assert adjusted_rand_index(a, np.array([1, 1, 0, 0])) == 1.0  # label-invariant
    assert adjusted_rand_index(a, a) == 1.0
    b = np.array([0, 1, 0, 1])
    assert adjusted_rand_index(a, b) < 0.01
    # singletons vs one block
    assert adjusted_rand_index(np.arange(4), np.zeros(4, dtype=int)) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_ari_bounded_and_symmetric(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 15))
    a = rng.integers(0, 4, size=n)
    b = rng.integers(0, 4, size=n)
    r1 = adjusted_rand_index(a, b)
    r2 = adjusted_rand_index(b, a)
    assert np.isclose(r1, r2, atol=1e-12)
    assert r1 <= 1.0 + 1e-12
