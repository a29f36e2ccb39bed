"""Full Gibbs sampler: allocation, coefficient, and concentration steps.

Each iteration runs

1. the auxiliary-cluster allocation sweep (skipped under a fixed partition),
2. for every non-baseline category j: fresh PG auxiliaries and a β*_{c,·,j}
   draw per cluster, then fresh auxiliaries over the whole panel and the
   θ_{·,j} draw from the block-design system,
3. the concentration update (skipped under a fixed partition, where α is
   inert because it enters no remaining full conditional).

Linear predictors are recomputed once per category and patched column-wise
after the β draws; within a category, cluster c's rows depend only on its
own block, so earlier clusters' updates never stale them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .data import ClusterState, GlobalCoefficients, PanelData
from .dp import ConcentrationState, DpConfig, allocation_sweep, compact_labels, sample_concentration
from .gauss import ModelPrior, _chol
from .mnl import _loglik_per_unit, _offsets, _psi_all
from .pg import _pg_trusted

__all__ = ["SamplerConfig", "ChainOutput", "run_mcmc", "two_stage_fit", "gibbs_iteration"]


@dataclass(frozen=True)
class SamplerConfig:
    """Run-length, prior, and initialization settings for one chain.

    init is "single" (one cluster, β*=0, θ=0, α=a_α/b_α) or "random-k"
    (labels uniform on init_k clusters, then compacted).  When
    fixed_partition is set the allocation and concentration steps are
    skipped and α stays at alpha0 throughout; fix_alpha holds α at alpha0
    while leaving the allocation moves free.
    """

    n_burnin: int = 5000
    n_retained: int = 10000
    thin: int = 1
    seed: int = 0
    dp: DpConfig = field(default_factory=DpConfig)
    prior: Optional[ModelPrior] = None
    fixed_partition: Optional[np.ndarray] = None
    init: str = "single"
    init_k: int = 8
    alpha0: Optional[float] = None
    fix_alpha: bool = False
    store_unit_coefficients: bool = False

    def __post_init__(self):
        if self.n_burnin < 0 or self.n_retained < 1 or self.thin < 1:
            raise ValueError("invalid run lengths")
        if self.init not in ("single", "random-k"):
            raise ValueError(f"unknown init policy {self.init!r}")
        if self.fixed_partition is not None:
            part = np.asarray(self.fixed_partition, dtype=np.int64)
            m = part.max() + 1
            if part.min() != 0 or np.unique(part).size != m:
                raise ValueError("fixed_partition labels must be contiguous")
            object.__setattr__(self, "fixed_partition", part)


@dataclass
class ChainOutput:
    """Retained draws of (s, M, α, β*, θ) plus per-draw log-likelihood.

    beta_star is a ragged list, one (M_d, K^c+1, J-1) array per draw; the
    assignment row of the same draw maps units onto its rows.  Log-
    likelihoods follow the kernel convention (multinomial coefficient
    omitted).  timing is in-memory bookkeeping and is never serialized.
    """

    assignments: np.ndarray
    n_clusters: np.ndarray
    alpha: np.ndarray
    beta_star: list
    theta: np.ndarray
    log_likelihood: np.ndarray
    config: SamplerConfig
    seed: int
    timing: dict = field(default_factory=dict)
    unit_coefficients: Optional[np.ndarray] = None

    @property
    def n_draws(self) -> int:
        return self.assignments.shape[0]

    def unit_beta(self, d: int) -> np.ndarray:
        """(N, K^c+1, J-1) per-unit coefficients implied by draw d."""
        return self.beta_star[d][self.assignments[d]]


def _initial_state(data: PanelData, config: SamplerConfig, rng):
    n = data.n_units
    kc, kg, j = data.k_cluster, data.k_global, data.n_categories
    if config.fixed_partition is not None:
        labels = config.fixed_partition.copy()
    elif config.init == "single":
        labels = np.zeros(n, dtype=np.int64)
    else:
        labels = rng.integers(0, max(config.init_k, 1), size=n)
        labels = compact_labels(labels, np.zeros((max(config.init_k, 1), 1, 1))).assignments
    m = int(labels.max()) + 1
    state = ClusterState(assignments=labels, beta_star=np.zeros((m, kc, j - 1)))
    theta = GlobalCoefficients(theta=np.zeros((kg, j - 1)))
    alpha0 = config.alpha0 if config.alpha0 is not None else config.dp.a_alpha / config.dp.b_alpha
    return state, theta, ConcentrationState(alpha=alpha0)


def _coefficient_pass(
    data: PanelData,
    state: ClusterState,
    theta: GlobalCoefficients,
    prior: ModelPrior,
    rng,
    wrong_kappa: bool = False,
) -> None:
    """Step 2 for all categories: per-cluster β draws, then the θ draw.

    Implements exactly the conditional laws of gauss.sample_beta_cluster and
    gauss.sample_theta, fused and phrased in precision space (conditioning
    on a block via the precision sub-matrix rather than a covariance Schur
    complement — the same distribution) so the per-iteration overhead stays
    small; tests/test_gauss.py pins the two paths to each other.

    Offsets C_j depend only on other categories' coefficients, so they are
    valid for the whole category pass; ψ_j is refreshed after the β draws
    feed the θ update.
    """
    n, t = data.n_units, data.n_periods
    kc, kg = data.k_cluster, data.k_global
    rows, cols = np.nonzero(data.trials > 0)
    if rows.size == 0:
        return
    b_flat = np.ascontiguousarray(data.trials[rows, cols])
    flat = rows * t + cols
    xc_flat = data.x_cluster.reshape(n * t, kc)[flat]
    xg_flat = data.x_global.reshape(n * t, kg)[flat]
    design = np.concatenate([xc_flat, xg_flat], axis=1)
    beta_prec = 1.0 / prior.beta.sigma0_diag
    theta_prec = 1.0 / prior.theta.sigma0_diag
    bt_prec = np.concatenate([beta_prec, theta_prec])
    bt_pmean = np.concatenate(
        [prior.beta.mu0 * beta_prec, prior.theta.mu0 * theta_prec]
    )
    kap_shift = 1.0 if wrong_kappa else 0.5
    for j in range(data.n_categories - 1):
        psi = _psi_all(data, state, theta)
        offs = _offsets(psi, j)[rows, cols]
        kap = data.y[rows, cols, j] - kap_shift * b_flat
        eta = psi[rows, cols, j] - offs
        labels = state.assignments[rows]
        by_cluster = [np.flatnonzero(labels == c) for c in range(state.n_clusters)]
        for c, sel in enumerate(by_cluster):
            omega = _pg_trusted(b_flat[sel], np.ascontiguousarray(eta[sel]), rng)
            x = design[sel]
            prec = x.T @ (x * omega[:, None])
            prec.flat[:: kc + kg + 1] += bt_prec
            rhs = x.T @ (kap[sel] + omega * offs[sel]) + bt_pmean
            left = _chol(prec, "cluster update precision")
            mu = cho_solve((left, True), rhs, check_finite=False)
            p_aa = prec[:kc, :kc]
            l_aa = _chol(p_aa, "cluster update precision")
            mean = mu[:kc] - cho_solve(
                (l_aa, True), prec[:kc, kc:] @ (theta.theta[:, j] - mu[kc:]),
                check_finite=False,
            )
            state.beta_star[c, :, j] = mean + solve_triangular(
                l_aa.T, rng.standard_normal(kc), lower=False, check_finite=False
            )
        if kg == 0:
            continue
        beta_j = state.beta_star[state.assignments, :, j]
        psi_j = (
            np.einsum("ntk,nk->nt", data.x_cluster, beta_j)
            + data.x_global @ theta.theta[:, j]
        )
        eta = np.ascontiguousarray(psi_j[rows, cols] - offs)
        omega = _pg_trusted(b_flat, eta, rng)
        m = state.n_clusters
        dim = m * kc + kg
        prec = np.zeros((dim, dim))
        rhs = np.empty(dim)
        resid = kap + omega * offs
        shared = slice(m * kc, dim)
        for c, sel in enumerate(by_cluster):
            x_c = xc_flat[sel]
            w_xc = x_c * omega[sel, None]
            blk = slice(c * kc, (c + 1) * kc)
            prec[blk, blk] = w_xc.T @ x_c
            cross = w_xc.T @ xg_flat[sel]
            prec[blk, shared] = cross
            prec[shared, blk] = cross.T
            rhs[blk] = x_c.T @ resid[sel]
        prec[shared, shared] = (xg_flat * omega[:, None]).T @ xg_flat
        rhs[shared] = xg_flat.T @ resid
        prec.flat[:: dim + 1] += np.concatenate([np.tile(beta_prec, m), theta_prec])
        rhs += np.concatenate([np.tile(prior.beta.mu0 * beta_prec, m), theta_prec * prior.theta.mu0])
        left = _chol(prec, "global update precision")
        mu = cho_solve((left, True), rhs, check_finite=False)
        p_bb = prec[shared, shared]
        l_bb = _chol(p_bb, "global update precision")
        beta_stack = state.beta_star[:, :, j].ravel()
        mean = mu[m * kc :] - cho_solve(
            (l_bb, True), prec[shared, : m * kc] @ (beta_stack - mu[: m * kc]),
            check_finite=False,
        )
        theta.theta[:, j] = mean + solve_triangular(
            l_bb.T, rng.standard_normal(kg), lower=False, check_finite=False
        )


def gibbs_iteration(
    data: PanelData,
    state: ClusterState,
    theta: GlobalCoefficients,
    conc: ConcentrationState,
    config: SamplerConfig,
    prior: ModelPrior,
    rng,
    mutation: Optional[str] = None,
) -> ConcentrationState:
    """One full sweep over steps 1-3, mutating state and theta in place.

    Returns the (possibly updated) concentration state.  `mutation` switches
    on a deliberate defect for calibration mutation checks: "kappa" biases
    the PG pseudo-observations, "alpha_odds" miscomputes the concentration
    mixture weight.  Production paths pass None.
    """
    if mutation not in (None, "kappa", "alpha_odds"):
        raise ValueError(f"unknown mutation {mutation!r}")
    fixed = config.fixed_partition is not None
    if not fixed:
        allocation_sweep(data, state, theta, conc, config.dp, prior.beta, rng)
    if data.n_periods > 0:
        _coefficient_pass(
            data, state, theta, prior, rng, wrong_kappa=mutation == "kappa"
        )
    if not fixed and not config.fix_alpha:
        conc = sample_concentration(
            conc, state.n_clusters, data.n_units, config.dp, rng,
            _wrong_odds=mutation == "alpha_odds",
        )
    return conc


def run_mcmc(data: PanelData, config: SamplerConfig, rng=None) -> ChainOutput:
    """Run one chain and return the retained, thinned draws.

    With the default rng=None a fresh generator is seeded from config.seed,
    which makes the output a pure function of (data, config).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    prior = config.prior or ModelPrior.standard(data.k_cluster, data.k_global)
    if prior.beta.dim != data.k_cluster or prior.theta.dim != data.k_global:
        raise ValueError("prior dimensions do not match the data")
    state, theta, conc = _initial_state(data, config, rng)

    n_iter = config.n_burnin + config.n_retained * config.thin
    keep_assign = np.empty((config.n_retained, data.n_units), dtype=np.int32)
    keep_m = np.empty(config.n_retained, dtype=np.int32)
    keep_alpha = np.empty(config.n_retained)
    keep_beta = []
    keep_theta = np.empty((config.n_retained, data.k_global, data.n_categories - 1))
    keep_ll = np.empty(config.n_retained)
    keep_unit = (
        np.empty((config.n_retained, data.n_units, data.k_cluster, data.n_categories - 1))
        if config.store_unit_coefficients
        else None
    )

    started = time.perf_counter()
    kept = 0
    for it in range(n_iter):
        conc = gibbs_iteration(data, state, theta, conc, config, prior, rng)
        past_burnin = it >= config.n_burnin
        if past_burnin and (it - config.n_burnin) % config.thin == config.thin - 1:
            keep_assign[kept] = state.assignments
            keep_m[kept] = state.n_clusters
            keep_alpha[kept] = conc.alpha
            keep_beta.append(state.beta_star.copy())
            keep_theta[kept] = theta.theta
            keep_ll[kept] = float(
                _loglik_per_unit(data.y, _psi_all(data, state, theta)).sum()
            )
            if keep_unit is not None:
                keep_unit[kept] = state.beta_star[state.assignments]
            kept += 1
    elapsed = time.perf_counter() - started

    return ChainOutput(
        assignments=keep_assign,
        n_clusters=keep_m,
        alpha=keep_alpha,
        beta_star=keep_beta,
        theta=keep_theta,
        log_likelihood=keep_ll,
        config=config,
        seed=config.seed,
        timing={"total_seconds": elapsed, "n_iterations": n_iter},
        unit_coefficients=keep_unit,
    )


def two_stage_fit(
    data: PanelData,
    config: SamplerConfig,
    n_restarts: int = 16,
    stage2_burnin: Optional[int] = None,
    stage2_retained: Optional[int] = None,
    freeze_alpha: bool = True,
    n_threads: int = 1,
):
    """Free run, Binder-optimal partition, then a conditional re-run.

    Stage 2 fixes the partition found by minimizing the expected Binder
    loss over stage-1 draws and re-estimates all coefficients with half the
    stage-1 run lengths (unless overridden).  α is frozen at its stage-1
    posterior median by default: with s fixed it feeds no other update.
    Returns (stage1 ChainOutput, partition, stage2 ChainOutput).
    """
    from .partition import posterior_similarity, search_optimal_partition

    if config.fixed_partition is not None:
        raise ValueError("two_stage_fit requires a free stage-1 partition")
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    stage1 = run_mcmc(data, config, np.random.default_rng(seeds[0]))
    psm = posterior_similarity(stage1.assignments, n_threads=n_threads)
    partition = search_optimal_partition(
        psm, n_restarts=n_restarts, rng=np.random.default_rng(seeds[1]),
        n_threads=n_threads,
    )
    cfg2 = replace(
        config,
        fixed_partition=partition,
        n_burnin=stage2_burnin if stage2_burnin is not None else config.n_burnin // 2,
        n_retained=stage2_retained if stage2_retained is not None else max(config.n_retained // 2, 1),
        alpha0=float(np.median(stage1.alpha)) if freeze_alpha else config.alpha0,
    )
    stage2 = run_mcmc(data, cfg2, np.random.default_rng(seeds[2]))
    return stage1, partition, stage2
