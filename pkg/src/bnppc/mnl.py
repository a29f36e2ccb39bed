"""Multinomial-logit kernel: linear predictors, probabilities, offsets.

The baseline category is the last one (index J-1); its linear predictor is
identically zero.  All soft-max / log-sum-exp computations subtract the
running maximum so that arbitrarily large predictors stay finite.

Public functions take the dataclasses from :mod:`bnppc.data`; the underscored
helpers operate on raw arrays and are what the sampler calls in its hot loop.
"""

from __future__ import annotations

import numpy as np

from .data import ClusterState, GlobalCoefficients, PanelData

__all__ = [
    "linear_predictor",
    "category_probabilities",
    "leave_one_out_offset",
    "log_likelihood_unit",
]


def linear_predictor(
    data: PanelData,
    state: ClusterState,
    theta: GlobalCoefficients,
    i: int,
    t: int,
) -> np.ndarray:
    """Length-J vector psi for unit i at period t; psi[J-1] == 0 exactly."""
    beta = state.beta_star[state.assignments[i]]  # (Kc, J-1)
    if beta.shape[0] != data.k_cluster or theta.theta.shape[0] != data.k_global:
        raise ValueError("coefficient dimensions do not match the data")
    psi = np.zeros(data.n_categories)
    psi[:-1] = data.x_cluster[i, t] @ beta + data.x_global[i, t] @ theta.theta
    return psi


def category_probabilities(psi: np.ndarray) -> np.ndarray:
    """Soft-max over the last axis, max-subtracted.

    Accepts any (..., J) array of finite linear predictors and returns
    probabilities summing to one along the last axis.
    """
    psi = np.asarray(psi, dtype=np.float64)
    shifted = psi - psi.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def leave_one_out_offset(psi: np.ndarray, j: int) -> float:
    """log sum_{l != j} exp(psi_l), the offset C for category j."""
    psi = np.asarray(psi, dtype=np.float64)
    rest = np.delete(psi, j, axis=-1)
    m = rest.max(axis=-1, keepdims=True)
    out = m[..., 0] + np.log(np.exp(rest - m).sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def log_likelihood_unit(
    data: PanelData,
    i: int,
    state: ClusterState,
    theta: GlobalCoefficients,
) -> float:
    """Multinomial log-likelihood of unit i summed over periods.

    The multinomial coefficient log(n! / prod y_j!) is omitted: it does not
    involve the regression coefficients, so it cancels from every conditional
    ratio the sampler forms.  Empty cells (trials == 0) contribute zero.
    """
    beta = state.beta_star[state.assignments[i]]
    psi = _psi_block(data.x_cluster[i], data.x_global[i], beta, theta.theta)
    return float(np.sum(data.y[i] * _log_probs(psi)))


# -- array-level helpers ----------------------------------------------------


def _psi_block(xc, xg, beta, theta):
    """(T, J) predictors for one unit's covariate block; last column zero."""
    t = xc.shape[0]
    psi = np.zeros((t, beta.shape[1] + 1))
    psi[:, :-1] = xc @ beta + xg @ theta
    return psi


def _psi_all(data: PanelData, state: ClusterState, theta: GlobalCoefficients):
    """(N, T, J) predictors for the whole panel under the current state."""
    betas = state.beta_star[state.assignments]  # (N, Kc, J-1)
    psi = np.zeros((data.n_units, data.n_periods, data.n_categories))
    psi[..., :-1] = np.einsum(
        "ntk,nkj->ntj", data.x_cluster, betas
    ) + data.x_global @ theta.theta
    return psi


def _log_probs(psi):
    """Normalized log-probabilities along the last axis."""
    m = psi.max(axis=-1, keepdims=True)
    shifted = psi - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _offsets(psi, j):
    """C_j = logsumexp of psi over categories != j, along the last axis."""
    rest = np.delete(psi, j, axis=-1)
    m = rest.max(axis=-1, keepdims=True)
    return m[..., 0] + np.log(np.exp(rest - m).sum(axis=-1))


def _loglik_per_unit(y, psi):
    """(N,) log-likelihoods given counts y and predictors psi, both (N,T,J)."""
    return np.einsum("ntj,ntj->n", y, _log_probs(psi))


def _candidate_logliks(y_i, xc_i, xg_i, betas, theta):
    """Log-likelihood of one unit under each candidate coefficient block.

    betas has shape (C, Kc, J-1); returns (C,).  Used by the allocation
    sweep, where C = M + n_aux candidates are scored at once.
    """
    core = np.einsum("tk,ckj->ctj", xc_i, betas) + xg_i @ theta
    psi = np.concatenate([core, np.zeros(core.shape[:2] + (1,))], axis=-1)
    return np.einsum("tj,ctj->c", y_i, _log_probs(psi))
