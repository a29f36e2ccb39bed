import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnppc.diagnostics import (
    autocorrelation,
    chain_summary,
    effective_sample_size,
    integrated_autocorr_time,
)
from bnppc.sampler import SamplerConfig, run_mcmc


def _ar1(n, rho, rng):
    x = np.empty(n)
    x[0] = rng.standard_normal() / np.sqrt(1 - rho**2)
    innov = rng.standard_normal(n - 1)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + innov[t - 1]
    return x


def test_autocorrelation_lag_zero_is_one(rng):
    x = rng.standard_normal(500)
    rho = autocorrelation(x, max_lag=20)
    assert rho.shape == (21,)
    assert rho[0] == pytest.approx(1.0)
    assert np.all(np.abs(rho) <= 1.0 + 1e-12)


def test_autocorrelation_matches_direct_estimator(rng):
    x = rng.standard_normal(200)
    rho = autocorrelation(x, max_lag=5)
    c = x - x.mean()
    for k in range(6):
        direct = np.dot(c[: 200 - k], c[k:]) / np.dot(c, c)
        assert rho[k] == pytest.approx(direct, abs=1e-12)


def test_constant_series_degenerates_gracefully():
    rho = autocorrelation(np.full(50, 3.2), max_lag=4)
    assert rho[0] == 1.0
    np.testing.assert_array_equal(rho[1:], 0.0)
    assert integrated_autocorr_time(np.full(50, 3.2)) > 0


def test_iact_iid_near_one(rng):
    x = rng.standard_normal(40000)
    tau = integrated_autocorr_time(x)
    assert 0.8 < tau < 1.3


@pytest.mark.parametrize("rho", [0.5, 0.8])
def test_iact_ar1_matches_theory(rho):
    # AR(1) has tau = (1+rho)/(1-rho)
    rng = np.random.default_rng(777)
    x = _ar1(200000, rho, rng)
    tau = integrated_autocorr_time(x)
    expected = (1 + rho) / (1 - rho)
    assert tau == pytest.approx(expected, rel=0.15)


def test_ess_bounds(rng):
    x = _ar1(5000, 0.9, np.random.default_rng(3))
    ess = effective_sample_size(x)
    assert 0 < ess < 5000
    iid = effective_sample_size(rng.standard_normal(5000))
    assert ess < iid


def test_short_series_fallback():
    assert integrated_autocorr_time(np.array([1.0, 2.0])) == 1.0
    assert autocorrelation(np.array([4.0])).shape == (1,)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=10, max_value=400))
def test_iact_positive_and_ess_at_most_n(seed, n):
    x = np.random.default_rng(seed).standard_normal(n)
    tau = integrated_autocorr_time(x)
    assert tau > 0
    assert effective_sample_size(x) <= n / max(tau, 1e-8) + 1e-6


def test_chain_summary_columns(small_panel):
    data, _ = small_panel
    chain = run_mcmc(data, SamplerConfig(n_burnin=20, n_retained=60, seed=0))
    table = chain_summary(chain)
    assert list(table.columns) == ["parameter", "mean", "sd", "iact", "ess"]
    names = set(table["parameter"])
    assert {"alpha", "n_clusters", "log_likelihood"} <= names
    kg, jm = chain.theta.shape[1], chain.theta.shape[2]
    assert len(table) == 3 + kg * jm
    assert table["parameter"].tolist()[3] == "theta[0,0]"
    assert np.all(table["ess"] > 0)
    row = table.set_index("parameter").loc["alpha"]
    assert row["mean"] == pytest.approx(chain.alpha.mean())
    assert row["sd"] == pytest.approx(chain.alpha.std(ddof=1))
