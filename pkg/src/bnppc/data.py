"""Core data containers for the clustered multinomial logit panel model.

Conventions used throughout the package:

* cluster labels are 0-based and contiguous (0..M-1),
* the last response category is the baseline: its coefficients are fixed at
  zero and never stored, so coefficient arrays have J-1 category columns,
* column 0 of the cluster-covariate array is the intercept (constant 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PanelData", "ClusterState", "GlobalCoefficients"]


def _as_float(a, name):
    out = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out


@dataclass(frozen=True)
class PanelData:
    """Balanced panel of multinomial counts with cluster and global covariates.

    Attributes
    ----------
    y : (N, T, J) int array
        Category counts; ``y[i, t].sum() == trials[i, t]``.
    trials : (N, T) int array
        Multinomial totals per unit-period.  Zero marks an empty cell that
        contributes nothing to the likelihood.  ``T == 0`` is allowed and
        yields a flat likelihood (prior-only runs).
    x_cluster : (N, T, Kc+1) float array
        Covariates whose coefficients vary by cluster; column 0 must be the
        intercept (constant 1).
    x_global : (N, T, Kg) float array
        Covariates with one shared coefficient set across all units.
    """

    y: np.ndarray
    trials: np.ndarray
    x_cluster: np.ndarray
    x_global: np.ndarray
    unit_ids: list = field(default_factory=list)
    period_labels: list = field(default_factory=list)
    cluster_covariate_names: list = field(default_factory=list)
    global_covariate_names: list = field(default_factory=list)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.int64)
        trials = np.asarray(self.trials, dtype=np.int64)
        xc = _as_float(self.x_cluster, "x_cluster")
        xg = _as_float(self.x_global, "x_global")
        if y.ndim != 3:
            raise ValueError(f"y must be (N, T, J), got shape {y.shape}")
        n, t, j = y.shape
        if j < 2:
            raise ValueError(f"need at least 2 categories, got {j}")
        if n < 1:
            raise ValueError("need at least one unit")
        if trials.shape != (n, t):
            raise ValueError(f"trials shape {trials.shape} != {(n, t)}")
        if xc.shape[:2] != (n, t) or xc.ndim != 3:
            raise ValueError(f"x_cluster shape {xc.shape} incompatible with y")
        if xg.ndim != 3 or xg.shape[:2] != (n, t):
            raise ValueError(f"x_global shape {xg.shape} incompatible with y")
        if np.any(y < 0):
            raise ValueError("y contains negative counts")
        if np.any(trials < 0):
            raise ValueError("trials contains negative totals")
        if np.any(y.sum(axis=2) != trials):
            raise ValueError("category counts do not sum to trials")
        if t > 0 and not np.allclose(xc[:, :, 0], 1.0):
            raise ValueError("x_cluster[:, :, 0] must be the intercept column")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "x_cluster", xc)
        object.__setattr__(self, "x_global", xg)
        if not self.unit_ids:
            object.__setattr__(self, "unit_ids", list(range(n)))
        if not self.period_labels:
            object.__setattr__(self, "period_labels", list(range(t)))
        if len(self.unit_ids) != n or len(self.period_labels) != t:
            raise ValueError("label lists do not match array dimensions")
        if not self.cluster_covariate_names:
            names = ["intercept"] + [f"x_cluster{k}" for k in range(1, xc.shape[2])]
            object.__setattr__(self, "cluster_covariate_names", names)
        if not self.global_covariate_names:
            names = [f"x_global{k}" for k in range(xg.shape[2])]
            object.__setattr__(self, "global_covariate_names", names)
        if len(self.cluster_covariate_names) != xc.shape[2] or len(
            self.global_covariate_names
        ) != xg.shape[2]:
            raise ValueError("covariate name lists do not match array dimensions")

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_categories(self) -> int:
        return self.y.shape[2]

    @property
    def k_cluster(self) -> int:
        """Number of cluster-covariate columns including the intercept."""
        return self.x_cluster.shape[2]

    @property
    def k_global(self) -> int:
        return self.x_global.shape[2]


@dataclass
class ClusterState:
    """Cluster allocation plus the per-cluster coefficient blocks.

    ``assignments`` holds contiguous labels 0..M-1; ``sizes[c]`` counts the
    units with label c (always >= 1); ``beta_star`` is (M, Kc+1, J-1).
    """

    assignments: np.ndarray
    beta_star: np.ndarray
    sizes: np.ndarray = None

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        self.beta_star = np.asarray(self.beta_star, dtype=np.float64)
        if self.sizes is None:
            self.sizes = np.bincount(
                self.assignments, minlength=self.beta_star.shape[0]
            ).astype(np.int64)
        else:
            self.sizes = np.asarray(self.sizes, dtype=np.int64)
        self.validate()

    @property
    def n_clusters(self) -> int:
        return self.beta_star.shape[0]

    def validate(self):
        m = self.n_clusters
        s = self.assignments
        if self.beta_star.ndim != 3:
            raise ValueError("beta_star must be (M, Kc+1, J-1)")
        if not np.all(np.isfinite(self.beta_star)):
            raise ValueError("beta_star contains non-finite values")
        if s.size == 0:
            raise ValueError("assignments is empty")
        if s.min() < 0 or s.max() >= m:
            raise ValueError(f"labels must lie in 0..{m - 1}")
        counts = np.bincount(s, minlength=m)
        if counts.size != m or np.any(counts < 1):
            raise ValueError("every cluster label must be occupied")
        if self.sizes.shape != (m,) or np.any(counts != self.sizes):
            raise ValueError("sizes inconsistent with assignments")

    def copy(self) -> "ClusterState":
        return ClusterState(
            assignments=self.assignments.copy(),
            beta_star=self.beta_star.copy(),
            sizes=self.sizes.copy(),
        )


@dataclass
class GlobalCoefficients:
    """Shared coefficients theta, one column per non-baseline category."""

    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim != 2:
            raise ValueError("theta must be (Kg, J-1)")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta contains non-finite values")

    def copy(self) -> "GlobalCoefficients":
        return GlobalCoefficients(theta=self.theta.copy())
