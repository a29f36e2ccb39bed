"""Posterior marginal effects of covariates on category probabilities.

For the soft-max kernel the derivative of p_j with respect to covariate k is

    ME_j = p_j (coeff_{k,j} - sum_l p_l coeff_{k,l}),

with the baseline coefficient fixed at 0.  Effects are evaluated at every
observed (unit, period) cell under each posterior draw's coefficients,
averaged within the clusters of a fixed partition, rescaled, and summarized
by 10/50/90% quantiles across draws; an effect is flagged significant when
the 80% equal-tailed interval (q10, q90) excludes zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import PanelData
from .mnl import category_probabilities
from .sampler import ChainOutput

__all__ = [
    "EffectSummary",
    "marginal_effect_point",
    "average_posterior_effects",
    "effects_table",
]


@dataclass(frozen=True)
class EffectSummary:
    cluster: int
    covariate: str
    category: int
    q10: float
    q50: float
    q90: float
    significant: bool
    scale: float = 1.0

    def __post_init__(self):
        if not self.q10 <= self.q50 <= self.q90:
            raise ValueError("quantiles must be ordered")


def marginal_effect_point(p: np.ndarray, coeff_k: np.ndarray) -> np.ndarray:
    """Analytic MNL derivative for one covariate at probabilities p.

    Both arguments are (..., J) with broadcasting; coeff_k carries a zero in
    the baseline slot.  The output sums to zero over categories.
    """
    p = np.asarray(p, dtype=np.float64)
    coeff_k = np.asarray(coeff_k, dtype=np.float64)
    weighted = (p * coeff_k).sum(axis=-1, keepdims=True)
    return p * (coeff_k - weighted)


def _draw_probabilities(data: PanelData, beta_unit: np.ndarray, theta: np.ndarray):
    """(N, T, J) probabilities from per-unit blocks and shared coefficients."""
    psi = np.zeros((data.n_units, data.n_periods, data.n_categories))
    psi[..., :-1] = (
        np.einsum("ntk,nkj->ntj", data.x_cluster, beta_unit)
        + data.x_global @ theta
    )
    return category_probabilities(psi)


def average_posterior_effects(
    chain: ChainOutput,
    data: PanelData,
    partition: np.ndarray,
    covariates=None,
    scales: dict = None,
) -> list:
    """Cluster-averaged effect summaries across posterior draws.

    `partition` must be the fixed partition the chain was run under (every
    draw's assignments are checked against it).  `covariates` selects names
    from the data's covariate name lists (default: everything except the
    intercept); `scales` maps covariate name → rescaling factor.
    """
    partition = np.asarray(partition, dtype=np.int64)
    if partition.shape[0] != data.n_units:
        raise ValueError("partition length does not match the data")
    if not np.all(chain.assignments == partition[None, :]):
        raise ValueError(
            "chain draws were not generated under the given partition"
        )
    scales = scales or {}
    cluster_names = list(data.cluster_covariate_names)
    global_names = list(data.global_covariate_names)
    if covariates is None:
        covariates = cluster_names[1:] + global_names
    lookup = {}
    for k, name in enumerate(cluster_names):
        lookup[name] = ("cluster", k)
    for k, name in enumerate(global_names):
        lookup[name] = ("global", k)
    unknown = [c for c in covariates if c not in lookup]
    if unknown:
        raise ValueError(f"unknown covariates: {unknown}")

    n_clusters = int(partition.max()) + 1
    j = data.n_categories
    members = [np.flatnonzero(partition == c) for c in range(n_clusters)]
    # per draw, per covariate: (n_clusters, J) cluster-averaged effects
    stacked = {name: np.empty((chain.n_draws, n_clusters, j)) for name in covariates}
    coeff = np.zeros((data.n_units, j))
    for d in range(chain.n_draws):
        beta_unit = chain.beta_star[d][partition]
        probs = _draw_probabilities(data, beta_unit, chain.theta[d])
        for name in covariates:
            family, k = lookup[name]
            if family == "cluster":
                coeff[:, :-1] = beta_unit[:, k, :]
            else:
                coeff[:, :-1] = chain.theta[d][k]
            me = marginal_effect_point(probs, coeff[:, None, :])
            for c in range(n_clusters):
                stacked[name][d, c] = me[members[c]].mean(axis=(0, 1))

    out = []
    for name in covariates:
        scale = float(scales.get(name, 1.0))
        # scale the quantiles, not the draws: quantile interpolation commutes
        # with positive rescaling only up to rounding, and reported tables
        # should be exactly `scale` times the unscaled run
        q10, q50, q90 = np.quantile(stacked[name], [0.1, 0.5, 0.9], axis=0) * scale
        if scale < 0:
            q10, q90 = q90, q10
        for c in range(n_clusters):
            for cat in range(j):
                lo, hi = float(q10[c, cat]), float(q90[c, cat])
                out.append(
                    EffectSummary(
                        cluster=c,
                        covariate=name,
                        category=cat,
                        q10=lo,
                        q50=float(q50[c, cat]),
                        q90=hi,
                        significant=bool(lo > 0 or hi < 0),
                        scale=scale,
                    )
                )
    return out


def effects_table(summaries: list) -> pd.DataFrame:
    """Flat table of effect summaries, one row per (cluster, covariate, category)."""
    return pd.DataFrame(
        [
            {
                "cluster": s.cluster,
                "covariate": s.covariate,
                "category": s.category,
                "q10": s.q10,
                "q50": s.q50,
                "q90": s.q90,
                "significant": s.significant,
                "scale": s.scale,
            }
            for s in summaries
        ]
    )
