"""Conjugate Gaussian full conditionals for the augmented logit model.

Given Pólya-Gamma draws ω the per-category likelihood is Gaussian in the
coefficients, with precision XᵀΩX + Σ₀⁻¹ and right-hand side
Xᵀ(κ + ΩC) + Σ₀⁻¹μ₀ (κ = y − n/2, C the leave-one-out offset).  Everything
here is built from Cholesky solves; matrices are never inverted explicitly.

Two coefficient stacks occur:

* per-cluster updates use the concatenated design [X^c X^nc] restricted to
  one cluster's units, coefficient vector (β_c-block, θ-block);
* the global update uses the block design X^L whose columns are the M
  cluster blocks followed by the shared block, coefficient vector
  (β*_1, …, β*_M, θ).

Both draw the target sub-vector by Schur-complement conditioning of the
joint Gaussian on the currently held complementary block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .data import ClusterState, GlobalCoefficients, PanelData
from .mnl import _offsets
from .pg import sample_pg_array

__all__ = [
    "PriorSpec",
    "ModelPrior",
    "PgAuxiliaries",
    "GaussianMoments",
    "BlockDesign",
    "draw_pg_auxiliaries",
    "joint_posterior_moments",
    "conditional_gaussian",
    "sample_beta_cluster",
    "build_block_design",
    "sample_theta",
    "sample_gaussian",
]


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal prior: one mean and variance per coefficient.

    The same prior applies to every non-baseline category's column.  The
    dimension must match the coefficient stack it is used with; `stack` and
    `tile` assemble the per-cluster and block-design stacks.
    """

    mu0: np.ndarray
    sigma0_diag: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu0, dtype=np.float64))
        var = np.atleast_1d(np.asarray(self.sigma0_diag, dtype=np.float64))
        if mu.shape != var.shape or mu.ndim != 1:
            raise ValueError("mu0 and sigma0_diag must be equal-length vectors")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
            raise ValueError("prior moments must be finite")
        if np.any(var <= 0):
            raise ValueError("prior variances must be strictly positive")
        object.__setattr__(self, "mu0", mu)
        object.__setattr__(self, "sigma0_diag", var)

    @classmethod
    def standard(cls, dim: int) -> "PriorSpec":
        """N(0, 1) on every coefficient."""
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]

    def stack(self, other: "PriorSpec") -> "PriorSpec":
        return PriorSpec(
            np.concatenate([self.mu0, other.mu0]),
            np.concatenate([self.sigma0_diag, other.sigma0_diag]),
        )

    def tile(self, k: int) -> "PriorSpec":
        """k copies of this block, as for the stacked β*₁…β*_M prior."""
        return PriorSpec(np.tile(self.mu0, k), np.tile(self.sigma0_diag, k))

    def draw_matrix(self, n_cols: int, rng) -> np.ndarray:
        """(dim, n_cols) draw with independent N(mu0, sigma0) entries."""
        z = rng.standard_normal((self.dim, n_cols))
        return self.mu0[:, None] + np.sqrt(self.sigma0_diag)[:, None] * z


@dataclass(frozen=True)
class ModelPrior:
    """Prior bundle for the two coefficient families.

    beta covers one cluster block (K^c+1 coefficients including intercept),
    theta the shared block; each update assembles the dimension-matched
    stack it needs from these two pieces.
    """

    beta: PriorSpec
    theta: PriorSpec

    @classmethod
    def standard(cls, k_cluster: int, k_global: int) -> "ModelPrior":
        return cls(PriorSpec.standard(k_cluster), PriorSpec.standard(k_global))


@dataclass(frozen=True)
class PgAuxiliaries:
    """PG pseudo-data for one category: flat rows over (unit, period) cells.

    Cells with trials == 0 carry no likelihood and are excluded; `units` and
    `periods` map each row back to its panel cell so designs can be aligned.
    """

    omega: np.ndarray
    kappa: np.ndarray
    offset: np.ndarray
    units: np.ndarray
    periods: np.ndarray

    def __post_init__(self):
        n = self.omega.shape[0]
        for name in ("kappa", "offset", "units", "periods"):
            if getattr(self, name).shape != (n,):
                raise ValueError("auxiliary arrays must be congruent 1-d")
        if np.any(self.omega <= 0):
            raise ValueError("omega must be strictly positive")

    @property
    def n_rows(self) -> int:
        return self.omega.shape[0]


@dataclass(frozen=True)
class GaussianMoments:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        c = np.asarray(self.covariance, dtype=np.float64)
        if c.shape != (m.shape[0], m.shape[0]):
            raise ValueError("covariance shape does not match mean")
        if m.size and not np.allclose(c, c.T, atol=1e-10):
            raise ValueError("covariance not symmetric")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", c)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _chol(mat: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor with a scale-aware jitter rescue.

    On failure adds 1e-10 * mean diagonal scale, up to three times, then
    raises with the offending matrix's conditioning in the message.
    """
    dim = mat.shape[0]
    if dim == 0:
        return np.zeros((0, 0))
    jitter = 1e-10 * np.trace(mat) / dim
    bumped = mat
    for attempt in range(4):
        try:
            return np.linalg.cholesky(bumped)
        except np.linalg.LinAlgError:
            if attempt == 3:
                break
            bumped = bumped + jitter * np.eye(dim)
    raise np.linalg.LinAlgError(
        f"{what} not positive definite after jitter "
        f"(dim={dim}, trace={np.trace(mat):.3e})"
    )


def sample_gaussian(moments: GaussianMoments, rng) -> np.ndarray:
    left = _chol(moments.covariance, "sampling covariance")
    return moments.mean + left @ rng.standard_normal(moments.dim)


def draw_pg_auxiliaries(
    data: PanelData,
    subset: np.ndarray,
    j: int,
    state: ClusterState,
    theta: GlobalCoefficients,
    rng,
    psi: np.ndarray = None,
    _wrong_kappa: bool = False,
) -> PgAuxiliaries:
    """ω, κ and offsets for category j over the subset's non-empty cells.

    ω_{it} ~ PG(n_it, ψ_j − C), κ = y_j − n/2, offset = C.  `psi` may carry
    precomputed (len(subset), T, J) predictors to avoid recomputation in the
    sampler's inner loop; it must reflect the current state exactly.
    _wrong_kappa switches on a deliberate κ = y − n defect for calibration
    mutation checks only.
    """
    subset = np.asarray(subset, dtype=np.int64)
    if j < 0 or j >= data.n_categories - 1:
        raise ValueError("j must index a non-baseline category")
    if psi is None:
        betas = state.beta_star[state.assignments[subset]]
        psi = np.zeros((subset.size, data.n_periods, data.n_categories))
        psi[..., :-1] = (
            np.einsum("ntk,nkj->ntj", data.x_cluster[subset], betas)
            + data.x_global[subset] @ theta.theta
        )
    trials = data.trials[subset]
    rows, cols = np.nonzero(trials > 0)
    offsets = _offsets(psi, j)[rows, cols]
    eta = psi[rows, cols, j] - offsets
    n = trials[rows, cols]
    omega = sample_pg_array(n, eta, rng)
    kappa = data.y[subset][rows, cols, j] - (n if _wrong_kappa else 0.5 * n)
    return PgAuxiliaries(
        omega=omega,
        kappa=kappa,
        offset=offsets,
        units=subset[rows],
        periods=cols.astype(np.int64),
    )


def joint_posterior_moments(design, aux: PgAuxiliaries, prior: PriorSpec) -> GaussianMoments:
    """Posterior N(μ̄, Σ̄) of the coefficient stack given PG pseudo-data.

    Σ̄ = (XᵀΩX + Σ₀⁻¹)⁻¹ and μ̄ = Σ̄(Xᵀ(κ + ΩC) + Σ₀⁻¹μ₀), via Cholesky.
    `design` is either a dense (rows, dim) matrix aligned with aux rows, or
    a BlockDesign whose block structure is exploited without densifying.
    """
    if isinstance(design, BlockDesign):
        precision, rhs = design.normal_equations(aux)
    else:
        design = np.asarray(design, dtype=np.float64)
        if design.shape[0] != aux.n_rows:
            raise ValueError("design rows do not match auxiliary rows")
        weighted = design * aux.omega[:, None]
        precision = design.T @ weighted
        rhs = design.T @ (aux.kappa + aux.omega * aux.offset)
    if precision.shape[0] != prior.dim:
        raise ValueError("prior dimension does not match design columns")
    precision = precision + np.diag(1.0 / prior.sigma0_diag)
    rhs = rhs + prior.mu0 / prior.sigma0_diag
    left = _chol(precision, "posterior precision")
    mean = cho_solve((left, True), rhs)
    cov = cho_solve((left, True), np.eye(prior.dim))
    return GaussianMoments(mean=mean, covariance=0.5 * (cov + cov.T))


def conditional_gaussian(
    moments: GaussianMoments,
    keep: np.ndarray,
    given_values: np.ndarray,
) -> GaussianMoments:
    """Condition a joint Gaussian on its complement block taking given values.

    `keep` indexes the coordinates to retain; the complement (in ascending
    order) is pinned to `given_values`.  Standard Schur complement:
    μ_a + Σ_ab Σ_bb⁻¹ (x_b − μ_b), Σ_aa − Σ_ab Σ_bb⁻¹ Σ_ba.
    """
    keep = np.asarray(keep, dtype=np.int64)
    comp = np.setdiff1d(np.arange(moments.dim), keep)
    given_values = np.atleast_1d(np.asarray(given_values, dtype=np.float64))
    if given_values.shape != comp.shape:
        raise ValueError("given_values must match the complement of keep")
    if comp.size == 0:
        return GaussianMoments(moments.mean[keep], moments.covariance[np.ix_(keep, keep)])
    s_aa = moments.covariance[np.ix_(keep, keep)]
    s_ab = moments.covariance[np.ix_(keep, comp)]
    s_bb = moments.covariance[np.ix_(comp, comp)]
    left = _chol(s_bb, "conditioning block")
    gain = cho_solve((left, True), s_ab.T).T  # Σ_ab Σ_bb⁻¹
    mean = moments.mean[keep] + gain @ (given_values - moments.mean[comp])
    cov = s_aa - gain @ s_ab.T
    return GaussianMoments(mean=mean, covariance=0.5 * (cov + cov.T))


@dataclass(frozen=True)
class BlockDesign:
    """Sparse view of the block design X^L over all (i, t) rows.

    Row r carries x_cluster in the column block of its unit's cluster and
    x_global in the trailing shared block; only the per-row cluster id and
    the dense X^c/X^nc slices are stored.  Column order is cluster blocks
    0..M-1 then the shared block, matching the φ stack (β*₁,…,β*_M, θ).
    """

    cluster_of_row: np.ndarray
    xc_rows: np.ndarray
    xg_rows: np.ndarray
    n_clusters: int
    n_periods: int
    row_units: np.ndarray
    row_periods: np.ndarray

    @property
    def k_cluster(self) -> int:
        return self.xc_rows.shape[1]

    @property
    def k_global(self) -> int:
        return self.xg_rows.shape[1]

    @property
    def n_columns(self) -> int:
        return self.n_clusters * self.k_cluster + self.k_global

    def densify(self) -> np.ndarray:
        """Materialize X^L (tests and small problems only)."""
        out = np.zeros((self.cluster_of_row.shape[0], self.n_columns))
        for r, c in enumerate(self.cluster_of_row):
            lo = c * self.k_cluster
            out[r, lo : lo + self.k_cluster] = self.xc_rows[r]
        out[:, self.n_clusters * self.k_cluster :] = self.xg_rows
        return out

    def normal_equations(self, aux: PgAuxiliaries):
        """(XᵀΩX, Xᵀ(κ + ΩC)) on the aux rows, assembled block-wise.

        Rows are stored in row-major (unit, period) order, so the aux rows
        map to design rows by the flat index unit·T + period.
        """
        sel = aux.units * self.n_periods + aux.periods
        kc, m = self.k_cluster, self.n_clusters
        dim = self.n_columns
        precision = np.zeros((dim, dim))
        rhs = np.zeros(dim)
        xc = self.xc_rows[sel]
        xg = self.xg_rows[sel]
        labels = self.cluster_of_row[sel]
        resid = aux.kappa + aux.omega * aux.offset
        shared = slice(m * kc, dim)
        for c in range(m):
            mask = labels == c
            xc_c = xc[mask]
            xg_c = xg[mask]
            blk = slice(c * kc, (c + 1) * kc)
            wxc = xc_c * aux.omega[mask, None]
            precision[blk, blk] = wxc.T @ xc_c
            cross = wxc.T @ xg_c
            precision[blk, shared] = cross
            precision[shared, blk] = cross.T
            rhs[blk] = xc_c.T @ resid[mask]
        precision[shared, shared] = (xg * aux.omega[:, None]).T @ xg
        rhs[shared] = xg.T @ resid
        return precision, rhs


def build_block_design(data: PanelData, state: ClusterState) -> tuple:
    """Block design X^L and the matching coefficient stacking order.

    Returns (BlockDesign, stack) where stack(theta_matrix, j) → the φ vector
    (β*₁,…,β*_M, θ) for category j under the current state.
    """
    n, t = data.n_units, data.n_periods
    units = np.repeat(np.arange(n), t)
    periods = np.tile(np.arange(t), n)
    design = BlockDesign(
        cluster_of_row=state.assignments[units],
        xc_rows=data.x_cluster.reshape(n * t, -1),
        xg_rows=data.x_global.reshape(n * t, -1),
        n_clusters=state.n_clusters,
        n_periods=t,
        row_units=units,
        row_periods=periods,
    )

    def stack(theta_matrix: np.ndarray, j: int) -> np.ndarray:
        return np.concatenate(
            [state.beta_star[:, :, j].ravel(), theta_matrix[:, j]]
        )

    return design, stack


def sample_beta_cluster(
    data: PanelData,
    c: int,
    j: int,
    state: ClusterState,
    theta: GlobalCoefficients,
    prior: ModelPrior,
    rng,
    psi: np.ndarray = None,
    _wrong_kappa: bool = False,
) -> np.ndarray:
    """Draw β*_{c,·,j} | everything else and write it into the state.

    Fresh PG auxiliaries on cluster c's units, joint Gaussian over the
    stacked (β_c, θ) vector with design [X^c X^nc], conditioned on the
    current θ_{·,j} by Schur complement, then one Gaussian draw.
    """
    members = np.flatnonzero(state.assignments == c)
    if members.size == 0:
        raise ValueError(f"cluster {c} is empty")
    aux = draw_pg_auxiliaries(
        data, members, j, state, theta, rng, psi=psi, _wrong_kappa=_wrong_kappa
    )
    design = np.concatenate(
        [
            data.x_cluster[aux.units, aux.periods],
            data.x_global[aux.units, aux.periods],
        ],
        axis=1,
    )
    joint = joint_posterior_moments(design, aux, prior.beta.stack(prior.theta))
    kc = data.k_cluster
    cond = conditional_gaussian(joint, np.arange(kc), theta.theta[:, j])
    draw = sample_gaussian(cond, rng)
    state.beta_star[c, :, j] = draw
    return draw


def sample_theta(
    data: PanelData,
    j: int,
    state: ClusterState,
    theta: GlobalCoefficients,
    prior: ModelPrior,
    rng,
    psi: np.ndarray = None,
    _wrong_kappa: bool = False,
) -> np.ndarray:
    """Draw θ_{·,j} | everything else and write it into theta.

    Fresh ω^L over all units, joint moments of the full φ stack under X^L
    with the tiled block prior, conditioned on the current β* blocks.
    """
    aux = draw_pg_auxiliaries(
        data, np.arange(data.n_units), j, state, theta, rng, psi=psi,
        _wrong_kappa=_wrong_kappa,
    )
    design, stack = build_block_design(data, state)
    m, kc = state.n_clusters, data.k_cluster
    joint = joint_posterior_moments(
        design, aux, prior.beta.tile(m).stack(prior.theta)
    )
    keep = np.arange(m * kc, joint.dim)
    cond = conditional_gaussian(joint, keep, stack(theta.theta, j)[: m * kc])
    draw = sample_gaussian(cond, rng)
    theta.theta[:, j] = draw
    return draw
