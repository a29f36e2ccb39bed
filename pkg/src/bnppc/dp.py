"""Dirichlet-process machinery: urn prior, allocation sweep, concentration.

The allocation step is Neal's auxiliary-cluster scheme: each unit is removed
from its cluster, n_aux fresh coefficient blocks are drawn from the base
measure (a removed singleton's block is recycled into auxiliary slot 0,
which keeps the stationary distribution exact), and the unit picks among
existing clusters with weight n_{-i,c} f(Y_i | β*_c, θ) and auxiliary slots
with weight (α/n_aux) f(Y_i | β_aux, θ).

Labels are 0-based and kept contiguous after every single-unit update, not
just at sweep end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ClusterState, GlobalCoefficients, PanelData
from .gauss import PriorSpec
from .mnl import _candidate_logliks

__all__ = [
    "DpConfig",
    "ConcentrationState",
    "crp_log_prior",
    "allocation_sweep",
    "sample_concentration",
    "compact_labels",
]


@dataclass(frozen=True)
class DpConfig:
    """Gamma(a_alpha, b_alpha) prior on the concentration (shape-rate), and
    the number of auxiliary clusters for the allocation step."""

    a_alpha: float = 3.0
    b_alpha: float = 2.0
    n_aux: int = 3

    def __post_init__(self):
        if not (self.a_alpha > 0 and self.b_alpha > 0):
            raise ValueError("gamma hyperparameters must be strictly positive")
        if self.n_aux < 1:
            raise ValueError("need at least one auxiliary cluster")


@dataclass
class ConcentrationState:
    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be strictly positive and finite")


def crp_log_prior(assignments: np.ndarray, alpha: float) -> float:
    """Log probability of the label sequence under the sequential urn.

    The first unit contributes log 1; unit i joining an existing cluster of
    current size n contributes log(n / (i - 1 + alpha)); opening a new
    cluster contributes log(alpha / (i - 1 + alpha)).  Labels must be
    contiguous in order of first appearance (0, then 1, ...).
    """
    s = np.asarray(assignments, dtype=np.int64)
    if s.size == 0:
        raise ValueError("empty assignment vector")
    counts = np.zeros(s.size, dtype=np.int64)
    seen = 0
    total = 0.0
    for idx, lab in enumerate(s):
        if lab == seen:  # next new label in appearance order
            if idx > 0:
                total += math.log(alpha) - math.log(idx + alpha)
            seen += 1
        elif 0 <= lab < seen:
            total += math.log(counts[lab]) - math.log(idx + alpha)
        else:
            raise ValueError(
                "labels must be contiguous in order of first appearance"
            )
        counts[lab] += 1
    return total


def compact_labels(state_or_assignments, beta_star: np.ndarray = None) -> ClusterState:
    """Drop unused labels and renumber by first appearance.

    Accepts either a ClusterState or a raw (assignments, beta_star) pair —
    the latter may reference empty rows of beta_star, as happens mid-update.
    An already-canonical state is returned as-is (same object).
    """
    if beta_star is None:
        state = state_or_assignments
        assignments, beta_star = state.assignments, state.beta_star
    else:
        state = None
        assignments = np.asarray(state_or_assignments, dtype=np.int64)
    _, first, inverse = np.unique(
        assignments, return_index=True, return_inverse=True
    )
    order = np.argsort(first, kind="stable")  # old compact ids by appearance
    if state is not None and np.array_equal(order, np.arange(order.size)):
        if order.size == state.n_clusters:
            return state
    rank = np.empty(order.size, dtype=np.int64)
    rank[order] = np.arange(order.size)
    kept = np.unique(assignments)[order]  # old labels in appearance order
    return ClusterState(
        assignments=rank[inverse],
        beta_star=np.asarray(beta_star, dtype=np.float64)[kept],
    )


def allocation_sweep(
    data: PanelData,
    state: ClusterState,
    theta: GlobalCoefficients,
    conc: ConcentrationState,
    cfg: DpConfig,
    base_measure: PriorSpec,
    rng,
) -> ClusterState:
    """One full pass of the auxiliary-cluster allocation step (in place).

    Units are visited in index order.  The state's arrays are replaced as
    clusters die and are born; invariants hold after every unit.  Returns
    the same (mutated) state, relabeled by first appearance.
    """
    n_aux = cfg.n_aux
    n_cats = data.n_categories - 1
    flat = data.n_periods == 0
    log_alpha_aux = math.log(conc.alpha) - math.log(n_aux)
    s = state.assignments
    sizes = state.sizes
    for i in range(data.n_units):
        c = s[i]
        sizes[c] -= 1
        singleton = sizes[c] == 0
        m = state.beta_star.shape[0]
        if flat:
            # Likelihood is constant: candidate blocks never affect the
            # choice, so materialize an auxiliary draw only on promotion.
            logw = np.full(m + n_aux, log_alpha_aux)
            with np.errstate(divide="ignore"):
                logw[:m] = np.log(sizes)
        else:
            aux_blocks = np.empty((n_aux, data.k_cluster, n_cats))
            start = 0
            if singleton:
                aux_blocks[0] = state.beta_star[c]
                start = 1
            for a in range(start, n_aux):
                aux_blocks[a] = base_measure.draw_matrix(n_cats, rng)
            candidates = np.concatenate([state.beta_star, aux_blocks])
            logw = _candidate_logliks(
                data.y[i],
                data.x_cluster[i],
                data.x_global[i],
                candidates,
                theta.theta,
            )
            with np.errstate(divide="ignore"):
                logw[:m] += np.log(sizes)
            logw[m:] += log_alpha_aux
        if singleton:
            logw[c] = -np.inf  # the emptied label is not an existing choice
        logw -= logw.max()
        weights = np.exp(logw)
        weights /= weights.sum()
        pick = int(np.searchsorted(np.cumsum(weights), rng.random()))
        pick = min(pick, m + n_aux - 1)  # guard fp edge at cumsum ≈ 1
        if pick < m:
            new_label = pick
        else:
            if flat:
                if singleton and pick == m:
                    block = state.beta_star[c]
                else:
                    block = base_measure.draw_matrix(n_cats, rng)
            else:
                block = aux_blocks[pick - m]
            if singleton:
                new_label = c  # dead label reused for the newborn cluster
                state.beta_star[c] = block
            else:
                new_label = m
                state.beta_star = np.concatenate(
                    [state.beta_star, block[None]]
                )
                sizes = np.concatenate([sizes, [0]])
        s[i] = new_label
        sizes[new_label] += 1
        if singleton and new_label != c:
            # cluster c died: delete its row, shift higher labels down
            state.beta_star = np.delete(state.beta_star, c, axis=0)
            sizes = np.delete(sizes, c)
            s[s > c] -= 1
        state.sizes = sizes
    out = compact_labels(s, state.beta_star)
    state.assignments = out.assignments
    state.beta_star = out.beta_star
    state.sizes = out.sizes
    return state


def sample_concentration(
    conc: ConcentrationState,
    n_clusters: int,
    n_units: int,
    cfg: DpConfig,
    rng,
    _wrong_odds: bool = False,
) -> ConcentrationState:
    """Concentration update via the beta-augmented two-gamma mixture.

    x ~ Beta(alpha+1, N); mixture odds (a_alpha + M - 1)/(N (b_alpha - log x));
    then alpha ~ Gamma(a_alpha + M, b_alpha - log x) with probability
    pi_x, else shape a_alpha + M - 1 (shape-rate throughout).  An x that
    underflows to log x = -inf is resampled.  _wrong_odds drops the N factor
    from the denominator — a deliberate defect for calibration mutation
    checks only.
    """
    m, n = n_clusters, n_units
    if m < 1 or n < 1:
        raise ValueError("need at least one cluster and one unit")
    log_x = -math.inf
    while not math.isfinite(log_x):
        log_x = math.log(rng.beta(conc.alpha + 1.0, n))
    rate = cfg.b_alpha - log_x
    odds = (cfg.a_alpha + m - 1.0) / ((1.0 if _wrong_odds else n) * rate)
    pi_x = odds / (1.0 + odds)
    shape = cfg.a_alpha + m if rng.random() < pi_x else cfg.a_alpha + m - 1.0
    return ConcentrationState(alpha=rng.gamma(shape, 1.0 / rate))
