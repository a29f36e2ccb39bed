"""Partition summarization: co-clustering probabilities and Binder search.

The expected Binder loss of a candidate partition decomposes as

    sum_{i<j} |1[s_i = s_j] - psm_ij|
      = sum_{i<j} psm_ij + sum_{i<j, co-clustered} (1 - 2 psm_ij),

so only the second term depends on the candidate: assigning unit i to
cluster c costs sum_{u in c} (1 - 2 psm_iu), and an empty cluster costs 0.
The search runs greedy sequential allocation along a random permutation,
then one-unit reallocation sweeps to a local optimum, best over restarts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SimilarityMatrix",
    "posterior_similarity",
    "binder_expected_loss",
    "search_optimal_partition",
    "adjusted_rand_index",
]

_SWEEP_CAP = 50


@dataclass(frozen=True)
class SimilarityMatrix:
    """N×N posterior co-clustering probabilities, unit diagonal."""

    psm: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.psm, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("psm must be square")
        if not np.allclose(p, p.T, atol=1e-12):
            raise ValueError("psm must be symmetric")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("psm entries must lie in [0, 1]")
        if not np.allclose(np.diag(p), 1.0, atol=1e-12):
            raise ValueError("psm diagonal must be 1")
        object.__setattr__(self, "psm", p)

    @property
    def n_units(self) -> int:
        return self.psm.shape[0]


def posterior_similarity(draws, n_threads: int = 1) -> SimilarityMatrix:
    """Fraction of draws co-clustering each pair, from (D, N) assignments."""
    draws = np.asarray(draws)
    if draws.ndim != 2 or draws.shape[0] < 1:
        raise ValueError("need a (n_draws, n_units) assignment array")
    d, n = draws.shape
    chunk = max(1, min(d, int(32e6 // max(n * n, 1)) or 1))
    spans = [(lo, min(lo + chunk, d)) for lo in range(0, d, chunk)]

    def accumulate(span):
        lo, hi = span
        block = draws[lo:hi]
        return (block[:, :, None] == block[:, None, :]).sum(axis=0, dtype=np.int64)

    if n_threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            counts = sum(pool.map(accumulate, spans))
    else:
        counts = sum(accumulate(s) for s in spans)
    psm = counts / d
    np.fill_diagonal(psm, 1.0)
    return SimilarityMatrix(psm=0.5 * (psm + psm.T))


def binder_expected_loss(candidate, psm: SimilarityMatrix) -> float:
    """Posterior-expected Binder loss sum_{i<j} |1[s_i=s_j] - psm_ij|."""
    s = np.asarray(candidate)
    p = psm.psm if isinstance(psm, SimilarityMatrix) else np.asarray(psm)
    if s.shape[0] != p.shape[0]:
        raise ValueError("candidate length does not match psm")
    same = s[:, None] == s[None, :]
    # diagonal contributes |1 - 1| = 0, so halving the full sum is exact
    return 0.5 * float(np.abs(same.astype(np.float64) - p).sum())


def _canonical(labels: np.ndarray) -> np.ndarray:
    """Renumber labels by first appearance (0, 1, ...)."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse]


def _greedy_build(gain, order, max_clusters):
    """Sequential allocation: each unit joins the cheapest cluster or opens
    a new one (cost 0); ties go to the lowest existing label."""
    n = gain.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    m = 0
    for i in order:
        scores = np.bincount(labels[labels >= 0], weights=gain[i, labels >= 0], minlength=m)
        if max_clusters is None or m < max_clusters:
            scores = np.append(scores, 0.0)
        best = int(np.argmin(scores))
        labels[i] = best
        if best == m:
            m += 1
    return labels, m


def _sweeten(gain, labels, m, max_clusters):
    """One-unit reallocation passes until a fixed point (capped)."""
    n = gain.shape[0]
    for _ in range(_SWEEP_CAP):
        moved = False
        for i in range(n):
            cur = labels[i]
            scores = np.bincount(labels, weights=gain[i], minlength=m)
            scores[cur] -= gain[i, i]  # remove the unit itself
            open_new = (max_clusters is None or m < max_clusters) and np.sum(labels == cur) > 1
            if open_new:
                scores = np.append(scores, 0.0)
            best = int(np.argmin(scores))
            if scores[best] < scores[cur] - 1e-12:
                labels[i] = m if best == m else best
                if best == m:
                    m += 1
                if not np.any(labels == cur):  # emptied: drop the label
                    labels[labels > cur] -= 1
                    m -= 1
                moved = True
        if not moved:
            break
    return labels, m


def _one_restart(gain, rng, max_clusters):
    order = rng.permutation(gain.shape[0])
    labels, m = _greedy_build(gain, order, max_clusters)
    labels, _ = _sweeten(gain, labels, m, max_clusters)
    return labels


def search_optimal_partition(
    psm: SimilarityMatrix,
    n_restarts: int = 16,
    max_clusters: int = None,
    rng=None,
    n_threads: int = 1,
) -> np.ndarray:
    """Minimize the expected Binder loss by stochastic search.

    Deterministic given the rng seed: restart r always uses the r-th spawned
    stream, so increasing n_restarts can only improve the returned loss.
    """
    p = psm.psm if isinstance(psm, SimilarityMatrix) else SimilarityMatrix(np.asarray(psm)).psm
    if rng is None:
        rng = np.random.default_rng(0)
    gain = 1.0 - 2.0 * p
    streams = rng.spawn(n_restarts)
    if n_threads > 1 and n_restarts > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            candidates = list(
                pool.map(lambda g: _one_restart(gain, g, max_clusters), streams)
            )
    else:
        candidates = [_one_restart(gain, g, max_clusters) for g in streams]
    losses = [binder_expected_loss(c, SimilarityMatrix(p)) for c in candidates]
    return _canonical(candidates[int(np.argmin(losses))])


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected agreement between two partitions of the same units."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("partitions must have equal length")
    n = a.shape[0]
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    comb = lambda x: x * (x - 1) / 2.0
    sum_cells = comb(table).sum()
    sum_rows = comb(table.sum(axis=1)).sum()
    sum_cols = comb(table.sum(axis=0)).sum()
    expected = sum_rows * sum_cols / comb(n)
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
