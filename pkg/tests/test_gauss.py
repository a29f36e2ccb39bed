"""Conjugate-update oracles.

Independent oracles throughout: explicit dense inversion for the joint
moments, the inversion-form conditional for the Schur path, and the
precision-space conditional identity that the fused sampler pass uses.
"""

import numpy as np
import pytest
from scipy import stats

from bnppc.data import ClusterState, GlobalCoefficients
from bnppc.gauss import (
    BlockDesign,
    GaussianMoments,
    ModelPrior,
    PgAuxiliaries,
    PriorSpec,
    build_block_design,
    conditional_gaussian,
    draw_pg_auxiliaries,
    joint_posterior_moments,
    sample_beta_cluster,
    sample_gaussian,
    sample_theta,
)


def _random_aux(rng, n_rows, n=3, t=4):
    units = rng.integers(0, n, size=n_rows).astype(np.int64)
    periods = rng.integers(0, t, size=n_rows).astype(np.int64)
    return PgAuxiliaries(
        omega=rng.gamma(2.0, 0.5, size=n_rows),
        kappa=rng.normal(size=n_rows),
        offset=rng.normal(size=n_rows),
        units=units,
        periods=periods,
    )


def test_prior_spec_stack_tile():
    a = PriorSpec(np.array([1.0, 2.0]), np.array([4.0, 9.0]))
    b = PriorSpec.standard(1)
    ab = a.stack(b)
    assert ab.dim == 3 and ab.mu0[2] == 0.0 and ab.sigma0_diag[1] == 9.0
    tiled = a.tile(3)
    assert tiled.dim == 6
    np.testing.assert_array_equal(tiled.mu0, np.tile(a.mu0, 3))


def test_moments_match_dense_inversion():
    rng = np.random.default_rng(4)
    k, n_rows = 3, 25
    design = rng.normal(size=(n_rows, k))
    aux = _random_aux(rng, n_rows)
    prior = PriorSpec(rng.normal(size=k), rng.uniform(0.5, 3.0, size=k))
    mom = joint_posterior_moments(design, aux, prior)
    # oracle by explicit inverse
    prec = design.T @ (design * aux.omega[:, None]) + np.diag(1.0 / prior.sigma0_diag)
    cov = np.linalg.inv(prec)
    rhs = design.T @ (aux.kappa + aux.omega * aux.offset) + prior.mu0 / prior.sigma0_diag
    np.testing.assert_allclose(mom.covariance, cov, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(mom.mean, cov @ rhs, rtol=1e-10, atol=1e-12)


def test_moments_prior_dimension_check():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        joint_posterior_moments(rng.normal(size=(5, 3)), _random_aux(rng, 5), PriorSpec.standard(4))


def test_conditional_matches_dense_formula():
    rng = np.random.default_rng(8)
    dim = 5
    a = rng.normal(size=(dim, dim + 2))
    cov = a @ a.T / dim
    mean = rng.normal(size=dim)
    mom = GaussianMoments(mean=mean, covariance=cov)
    keep = np.array([0, 2, 3])
    other = np.array([1, 4])
    given = rng.normal(size=2)
    cond = conditional_gaussian(mom, keep, given)
    s_aa = cov[np.ix_(keep, keep)]
    s_ab = cov[np.ix_(keep, other)]
    s_bb = cov[np.ix_(other, other)]
    expect_mean = mean[keep] + s_ab @ np.linalg.solve(s_bb, given - mean[other])
    expect_cov = s_aa - s_ab @ np.linalg.solve(s_bb, s_ab.T)
    np.testing.assert_allclose(cond.mean, expect_mean, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(cond.covariance, expect_cov, rtol=1e-10, atol=1e-12)


def test_conditional_with_empty_complement_is_marginal():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(3, 5))
    mom = GaussianMoments(mean=np.zeros(3), covariance=a @ a.T / 3)
    cond = conditional_gaussian(mom, np.arange(3), np.zeros(0))
    np.testing.assert_array_equal(cond.mean, mom.mean)
    np.testing.assert_array_equal(cond.covariance, mom.covariance)


def test_precision_space_conditional_equivalence():
    """The fused sampler conditions via the precision matrix; same law.

    For a joint precision P and rhs r (so cov = P^-1, mean = P^-1 r), the
    conditional of block a given block b has cov = P_aa^-1 and mean =
    mu_a - P_aa^-1 P_ab (x_b - mu_b).  This identity is what lets
    sampler._coefficient_pass skip the explicit Schur complement.
    """
    rng = np.random.default_rng(77)
    k, n_rows = 4, 30
    design = rng.normal(size=(n_rows, k))
    aux = _random_aux(rng, n_rows)
    prior = PriorSpec(rng.normal(size=k), rng.uniform(0.5, 2.0, size=k))
    mom = joint_posterior_moments(design, aux, prior)
    keep = np.arange(2)
    given = rng.normal(size=2)
    cond = conditional_gaussian(mom, keep, given)

    prec = design.T @ (design * aux.omega[:, None]) + np.diag(1.0 / prior.sigma0_diag)
    rhs = design.T @ (aux.kappa + aux.omega * aux.offset) + prior.mu0 / prior.sigma0_diag
    mu = np.linalg.solve(prec, rhs)
    p_aa = prec[:2, :2]
    p_ab = prec[:2, 2:]
    mean_prec = mu[:2] - np.linalg.solve(p_aa, p_ab @ (given - mu[2:]))
    cov_prec = np.linalg.inv(p_aa)
    np.testing.assert_allclose(cond.mean, mean_prec, rtol=1e-9, atol=1e-11)
    np.testing.assert_allclose(cond.covariance, cov_prec, rtol=1e-9, atol=1e-11)


def test_pg_auxiliaries_structure(small_panel, rng):
    data, truth = small_panel
    state = ClusterState(truth.assignments.copy(), truth.beta_star.copy())
    theta = GlobalCoefficients(truth.theta.copy())
    subset = np.array([1, 4, 6])
    aux = draw_pg_auxiliaries(data, subset, 0, state, theta, rng)
    assert aux.n_rows == 3 * data.n_periods  # no empty cells in this panel
    assert np.all(aux.omega > 0)
    assert set(np.unique(aux.units)) == {1, 4, 6}
    np.testing.assert_allclose(
        aux.kappa,
        (data.y[subset][:, :, 0] - 0.5 * data.trials[subset]).reshape(-1),
    )


def test_pg_auxiliaries_skip_empty_cells(small_panel, rng):
    data, truth = small_panel
    y = data.y.copy()
    trials = data.trials.copy()
    y[2, 1] = 0
    trials[2, 1] = 0
    from bnppc.data import PanelData

    masked = PanelData(y=y, trials=trials, x_cluster=data.x_cluster, x_global=data.x_global)
    state = ClusterState(truth.assignments.copy(), truth.beta_star.copy())
    theta = GlobalCoefficients(truth.theta.copy())
    aux = draw_pg_auxiliaries(masked, np.arange(masked.n_units), 1, state, theta, rng)
    assert aux.n_rows == masked.n_units * masked.n_periods - 1
    assert not np.any((aux.units == 2) & (aux.periods == 1))


def test_precomputed_psi_gives_identical_aux(small_panel):
    from bnppc.mnl import _psi_all

    data, truth = small_panel
    state = ClusterState(truth.assignments.copy(), truth.beta_star.copy())
    theta = GlobalCoefficients(truth.theta.copy())
    psi = _psi_all(data, state, theta)
    subset = np.arange(data.n_units)
    a1 = draw_pg_auxiliaries(data, subset, 0, state, theta, np.random.default_rng(5))
    a2 = draw_pg_auxiliaries(data, subset, 0, state, theta, np.random.default_rng(5), psi=psi)
    np.testing.assert_array_equal(a1.omega, a2.omega)
    np.testing.assert_array_equal(a1.offset, a2.offset)


def test_block_design_normal_equations_match_dense(small_panel, rng):
    data, truth = small_panel
    state = ClusterState(truth.assignments.copy(), truth.beta_star.copy())
    theta = GlobalCoefficients(truth.theta.copy())
    design, _ = build_block_design(data, state)
    dense = design.densify()
    assert dense.shape == (
        data.n_units * data.n_periods,
        state.n_clusters * data.k_cluster + data.k_global,
    )
    aux = draw_pg_auxiliaries(data, np.arange(data.n_units), 0, state, theta, rng)
    prec_blocks, rhs_blocks = design.normal_equations(aux)
    prec_dense = dense.T @ (dense * aux.omega[:, None])
    rhs_dense = dense.T @ (aux.kappa + aux.omega * aux.offset)
    np.testing.assert_allclose(prec_blocks, prec_dense, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(rhs_blocks, rhs_dense, rtol=1e-10, atol=1e-12)


def test_sample_gaussian_moments():
    rng = np.random.default_rng(3)
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    mom = GaussianMoments(mean=np.array([1.0, -2.0]), covariance=cov)
    draws = np.stack([sample_gaussian(mom, rng) for _ in range(20000)])
    np.testing.assert_allclose(draws.mean(axis=0), mom.mean, atol=0.05)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.08)


def test_sample_beta_cluster_writes_state(small_panel, rng):
    data, truth = small_panel
    state = ClusterState(truth.assignments.copy(), truth.beta_star.copy())
    theta = GlobalCoefficients(truth.theta.copy())
    prior = ModelPrior.standard(data.k_cluster, data.k_global)
    before = state.beta_star[0, :, 1].copy()
    draw = sample_beta_cluster(data, 0, 1, state, theta, prior, rng)
    assert not np.allclose(draw, before)
    np.testing.assert_array_equal(state.beta_star[0, :, 1], draw)
    # other clusters and categories untouched
    np.testing.assert_array_equal(state.beta_star[1:], truth.beta_star[1:])
    np.testing.assert_array_equal(state.beta_star[0, :, 0], truth.beta_star[0, :, 0])


def test_sample_theta_writes_theta(small_panel, rng):
    data, truth = small_panel
    state = ClusterState(truth.assignments.copy(), truth.beta_star.copy())
    theta = GlobalCoefficients(truth.theta.copy())
    prior = ModelPrior.standard(data.k_cluster, data.k_global)
    draw = sample_theta(data, 0, state, theta, prior, rng)
    np.testing.assert_array_equal(theta.theta[:, 0], draw)
    np.testing.assert_array_equal(theta.theta[:, 1], truth.theta[:, 1])


def test_binary_conditional_mean_against_glm_mode():
    """With tight data the beta posterior concentrates near the MLE."""
    rng = np.random.default_rng(10)
    from bnppc.data import PanelData

    n, t, trials = 4, 40, 50
    p_true = 0.3
    y1 = rng.binomial(trials, p_true, size=(n, t))
    y = np.stack([y1, trials - y1], axis=-1)
    data = PanelData(
        y=y,
        trials=np.full((n, t), trials, dtype=np.int64),
        x_cluster=np.ones((n, t, 1)),
        x_global=np.zeros((n, t, 0)),
    )
    state = ClusterState(np.zeros(n, dtype=np.int64), np.zeros((1, 1, 1)))
    theta = GlobalCoefficients(np.zeros((0, 1)))
    prior = ModelPrior.standard(1, 0)
    draws = np.array(
        [sample_beta_cluster(data, 0, 0, state, theta, prior, rng)[0] for _ in range(4000)]
    )
    mle = np.log(y1.sum() / (n * t * trials - y1.sum()))
    assert abs(draws.mean() - mle) < 0.05
    assert stats.normaltest(draws).pvalue > 1e-6  # near-Gaussian at this scale
