"""Joint-distribution calibration test for the Gibbs sampler.

Two simulators target the same joint law of (parameters, data) on a fixed
covariate design:

* marginal-conditional — draw (α, s, β*, θ) from the prior, then data from
  the likelihood; successive replications are i.i.d.;
* successive-conditional — alternate one full Gibbs iteration given the
  current data with a fresh data draw given the current parameters; the
  resulting chain is stationary from the start because it is initialized
  with an exact prior draw.

If every full conditional is correct, both produce the same distribution
for any test function; means are compared by two-sample z-scores with the
successive side's standard error inflated by its integrated autocorrelation
time.  Deliberately injected defects ("kappa", "alpha_odds") must produce
large |z| — a mutation check that the test has power.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import ClusterState, GlobalCoefficients, PanelData
from .diagnostics import integrated_autocorr_time
from .gauss import ModelPrior
from .mnl import _log_probs
from .sampler import SamplerConfig, gibbs_iteration
from .simulate import Dimensions, GroundTruth, covariate_panel, draw_ground_truth, simulate_counts

__all__ = ["GewekeResult", "geweke_test", "default_geweke_dims"]


def default_geweke_dims() -> Dimensions:
    return Dimensions(n_units=5, n_periods=3, n_categories=3, k_cluster=1, k_global=1)


@dataclass(frozen=True)
class GewekeResult:
    names: list
    z_scores: np.ndarray
    mean_marginal: np.ndarray
    mean_successive: np.ndarray
    std_error: np.ndarray
    n_samples: int
    mutation: Optional[str]

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))

    def table(self):
        import pandas as pd

        return pd.DataFrame(
            {
                "statistic": self.names,
                "mean_marginal": self.mean_marginal,
                "mean_successive": self.mean_successive,
                "se": self.std_error,
                "z": self.z_scores,
            }
        )


def _stat_names(dims: Dimensions) -> list:
    kc, kg, jm = dims.k_cluster + 1, dims.k_global, dims.n_categories - 1
    names = ["alpha", "alpha_sq", "n_clusters", "log_likelihood"]
    names += [f"theta[{k},{j}]" for k in range(kg) for j in range(jm)]
    names += [f"theta_sq[{k},{j}]" for k in range(kg) for j in range(jm)]
    names += [
        f"beta_unit[{i},{k},{j}]"
        for i in range(dims.n_units)
        for k in range(kc)
        for j in range(jm)
    ]
    names += [
        f"beta_unit_sq[{i},{k},{j}]"
        for i in range(dims.n_units)
        for k in range(kc)
        for j in range(jm)
    ]
    names += [
        f"coclust[{i},{j}]"
        for i in range(dims.n_units)
        for j in range(i + 1, dims.n_units)
    ]
    return names


def _stats_into(out, alpha, labels, beta_star, theta, y, xc, xg, pair_i, pair_j):
    """Fill one row of test-function values for the current (params, data)."""
    n, t, j_all = y.shape
    beta_unit = beta_star[labels]
    psi = np.zeros((n, t, j_all))
    psi[..., :-1] = np.einsum("ntk,nkj->ntj", xc, beta_unit) + xg @ theta
    loglik = float(np.sum(y * _log_probs(psi)))
    k = 0
    out[k] = alpha
    out[k + 1] = alpha * alpha
    out[k + 2] = labels.max() + 1
    out[k + 3] = loglik
    k += 4
    th = theta.ravel()
    out[k : k + th.size] = th
    k += th.size
    out[k : k + th.size] = th * th
    k += th.size
    bu = beta_unit.ravel()
    out[k : k + bu.size] = bu
    k += bu.size
    out[k : k + bu.size] = bu * bu
    k += bu.size
    out[k:] = labels[pair_i] == labels[pair_j]


def geweke_test(
    n_samples: int,
    dims: Optional[Dimensions] = None,
    config: Optional[SamplerConfig] = None,
    rng=None,
    mutation: Optional[str] = None,
    trials: int = 2,
) -> GewekeResult:
    """Run both simulators for n_samples each and return per-statistic z.

    `mutation` injects a defect into the successive-conditional side only
    (None for the null check).  The covariate design is drawn once and
    shared, so both sides target the identical joint distribution.
    """
    dims = dims or default_geweke_dims()
    config = config or SamplerConfig()
    if config.fixed_partition is not None:
        raise ValueError("the calibration test needs the free sampler")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    prior = config.prior or ModelPrior.standard(dims.k_cluster + 1, dims.k_global)
    names = _stat_names(dims)
    n_stats = len(names)
    pair_i, pair_j = np.triu_indices(dims.n_units, k=1)
    xc, xg = covariate_panel(dims, rng)
    trials_arr = np.broadcast_to(
        np.asarray(trials, dtype=np.int64), (dims.n_units, dims.n_periods)
    ).copy()

    marginal = np.empty((n_samples, n_stats))
    for r in range(n_samples):
        truth = draw_ground_truth(dims, config.dp, prior, rng)
        y = simulate_counts(xc, xg, truth, trials_arr, rng)
        _stats_into(
            marginal[r], truth.alpha, truth.assignments, truth.beta_star,
            truth.theta, y, xc, xg, pair_i, pair_j,
        )

    truth = draw_ground_truth(dims, config.dp, prior, rng)
    y = simulate_counts(xc, xg, truth, trials_arr, rng)
    data = PanelData(y=y, trials=trials_arr, x_cluster=xc, x_global=xg)
    state = ClusterState(
        assignments=truth.assignments.copy(), beta_star=truth.beta_star.copy()
    )
    theta = GlobalCoefficients(theta=truth.theta.copy())
    from .dp import ConcentrationState

    conc = ConcentrationState(alpha=truth.alpha)
    successive = np.empty((n_samples, n_stats))
    for r in range(n_samples):
        conc = gibbs_iteration(
            data, state, theta, conc, config, prior, rng, mutation=mutation
        )
        data.y[:] = simulate_counts(
            xc, xg,
            GroundTruth(state.assignments, state.beta_star, theta.theta),
            trials_arr, rng,
        )
        _stats_into(
            successive[r], conc.alpha, state.assignments, state.beta_star,
            theta.theta, data.y, xc, xg, pair_i, pair_j,
        )

    mean_m = marginal.mean(axis=0)
    mean_s = successive.mean(axis=0)
    var_m = marginal.var(axis=0, ddof=1)
    var_s = successive.var(axis=0, ddof=1)
    iact = np.array(
        [integrated_autocorr_time(successive[:, k]) for k in range(n_stats)]
    )
    se = np.sqrt(var_m / n_samples + var_s * iact / n_samples)
    se = np.where(se > 0, se, np.inf)  # constant statistics carry no evidence
    z = (mean_m - mean_s) / se
    return GewekeResult(
        names=names,
        z_scores=z,
        mean_marginal=mean_m,
        mean_successive=mean_s,
        std_error=se,
        n_samples=n_samples,
        mutation=mutation,
    )
