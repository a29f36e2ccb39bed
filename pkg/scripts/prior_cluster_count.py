#!/usr/bin/env python3
"""Prior expected cluster count: Monte Carlo sampler vs numeric integration.

With a flat likelihood the sampler targets the partition prior exactly, so
the Monte-Carlo E[M] from a data-free run must agree with the closed-form
CRP expectation E[M | alpha] = sum_i alpha/(alpha+i) integrated over the
Gamma(a_alpha, b_alpha) hyperprior.  Useful when choosing hyperparameters:
it shows how many clusters the prior implies at a given panel size.

Usage:
    python3 scripts/prior_cluster_count.py --units 912 --a-alpha 3 --b-alpha 2
"""

import argparse
import sys
import time

import numpy as np
from scipy import integrate, stats

from bnppc.data import PanelData
from bnppc.dp import DpConfig
from bnppc.sampler import SamplerConfig, run_mcmc


def expected_clusters(n_units: int, a_alpha: float, b_alpha: float) -> float:
    """E[M] under the CRP with a Gamma(shape, rate) concentration prior."""
    idx = np.arange(n_units)

    def integrand(alpha):
        return stats.gamma.pdf(alpha, a_alpha, scale=1.0 / b_alpha) * np.sum(
            alpha / (alpha + idx)
        )

    value, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
    return value


def flat_panel(n_units: int) -> PanelData:
    """A panel with zero modeled periods: the likelihood is identically 1."""
    return PanelData(
        y=np.zeros((n_units, 0, 2), dtype=np.int64),
        trials=np.zeros((n_units, 0), dtype=np.int64),
        x_cluster=np.ones((n_units, 0, 1)),
        x_global=np.zeros((n_units, 0, 0)),
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--units", type=int, default=912)
    ap.add_argument("--a-alpha", type=float, default=3.0)
    ap.add_argument("--b-alpha", type=float, default=2.0)
    ap.add_argument("--burnin", type=int, default=2000)
    ap.add_argument("--draws", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args(argv)

    oracle = expected_clusters(args.units, args.a_alpha, args.b_alpha)
    print(f"numeric integration: E[M] = {oracle:.4f}")

    t0 = time.time()
    config = SamplerConfig(
        n_burnin=args.burnin,
        n_retained=args.draws,
        seed=args.seed,
        dp=DpConfig(a_alpha=args.a_alpha, b_alpha=args.b_alpha),
        init="random-k",
        init_k=10,
    )
    chain = run_mcmc(flat_panel(args.units), config)
    mc = chain.n_clusters.mean()
    print(
        f"sampler ({args.draws} draws, {time.time() - t0:.0f}s): "
        f"E[M] = {mc:.4f}  (difference {mc - oracle:+.4f}), "
        f"E[alpha] = {chain.alpha.mean():.3f}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
