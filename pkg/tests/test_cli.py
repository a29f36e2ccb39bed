import json

import numpy as np
import pandas as pd
import pytest

from bnppc.cli import cli_dispatch
from bnppc.io import load_chain


def _run(*argv):
    return cli_dispatch(list(argv))


SIM = (
    "simulate",
    "--units", "8", "--periods", "4", "--categories", "3",
    "--clusters", "2", "--trials", "12", "--seed", "9",
)

FIT_FAST = ("--burnin", "10", "--draws", "25", "--lag", "0", "--no-standardize")


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert _run(*SIM, "--output-dir", str(out)) == 0
    return out


@pytest.fixture(scope="module")
def fit_dir(tmp_path_factory, sim_dir):
    out = tmp_path_factory.mktemp("fit")
    code = _run(
        "fit", "--data", str(sim_dir / "dataset.csv"), *FIT_FAST,
        "--seed", "3", "--output-dir", str(out),
    )
    assert code == 0
    return out / "chain"


def test_simulate_outputs(sim_dir):
    assert (sim_dir / "dataset.csv").exists()
    assert (sim_dir / "ingestion.json").exists()
    truth = json.loads((sim_dir / "truth.json").read_text())
    assert len(truth["assignments"]) == 8
    assert np.asarray(truth["beta_star"]).shape[0] == 2


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(*SIM, "--output-dir", str(a)) == 0
    assert _run(*SIM, "--output-dir", str(b)) == 0
    for name in ("dataset.csv", "truth.json", "ingestion.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_fit_uses_sidecar_spec(fit_dir):
    chain = load_chain(fit_dir)
    assert chain.n_draws == 25
    assert chain.config.n_burnin == 10
    # the echoed panel makes the directory self-contained
    assert (fit_dir / "data.csv").exists()
    assert (fit_dir / "ingestion.json").exists()


def test_fit_requires_columns_without_sidecar(tmp_path, sim_dir):
    bare = tmp_path / "bare.csv"
    bare.write_bytes((sim_dir / "dataset.csv").read_bytes())
    code = _run("fit", "--data", str(bare), *FIT_FAST, "--output-dir", str(tmp_path))
    assert code == 1  # no --categories, no sidecar ingestion.json


def test_fit_explicit_columns(tmp_path, sim_dir):
    bare = tmp_path / "bare.csv"
    bare.write_bytes((sim_dir / "dataset.csv").read_bytes())
    code = _run(
        "fit", "--data", str(bare), "--unit-col", "unit", "--time-col", "period",
        "--categories", "cat0,cat1,cat2", "--cluster-covariates", "x_cluster1",
        "--global-covariates", "x_global0", *FIT_FAST,
        "--output-dir", str(tmp_path / "out"),
    )
    assert code == 0
    chain = load_chain(tmp_path / "out" / "chain")
    assert chain.theta.shape[1:] == (1, 2)


def test_two_stage_fit(tmp_path, sim_dir):
    code = _run(
        "fit", "--data", str(sim_dir / "dataset.csv"), "--two-stage",
        "--burnin", "20", "--draws", "40", "--lag", "0", "--no-standardize",
        "--restarts", "4", "--seed", "11", "--output-dir", str(tmp_path),
    )
    assert code == 0
    stage1 = load_chain(tmp_path / "chain-stage1")
    stage2 = load_chain(tmp_path / "chain")
    assert stage1.n_draws == 40
    assert stage2.n_draws == 20  # re-run at half length
    assert stage2.config.fixed_partition is not None
    labels = pd.read_csv(tmp_path / "chain" / "partition.csv")["cluster"].to_numpy()
    np.testing.assert_array_equal(labels, stage2.config.fixed_partition)


def test_partition_command(tmp_path, fit_dir):
    code = _run(
        "partition", "--chain", str(fit_dir), "--restarts", "4",
        "--seed", "1", "--output-dir", str(tmp_path),
    )
    assert code == 0
    psm = np.loadtxt(tmp_path / "psm.csv", delimiter=",")
    assert psm.shape == (8, 8)
    np.testing.assert_allclose(psm, psm.T)
    table = pd.read_csv(tmp_path / "partition.csv")
    assert list(table.columns) == ["unit", "cluster"]
    assert len(table) == 8


def test_effects_command_and_scale(tmp_path, sim_dir):
    fitted = tmp_path / "fitted"
    truth = json.loads((sim_dir / "truth.json").read_text())
    labels_file = tmp_path / "labels.txt"
    labels_file.write_text("\n".join(str(c) for c in truth["assignments"]) + "\n")
    code = _run(
        "fit", "--data", str(sim_dir / "dataset.csv"), *FIT_FAST,
        "--fix-partition", str(labels_file), "--seed", "4",
        "--output-dir", str(fitted),
    )
    assert code == 0

    plain, scaled = tmp_path / "plain", tmp_path / "scaled"
    assert _run("effects", "--chain", str(fitted / "chain"),
                "--output-dir", str(plain)) == 0
    assert _run("effects", "--chain", str(fitted / "chain"),
                "--scale", "x_cluster1=100", "--output-dir", str(scaled)) == 0

    # round_trip parsing: the default C float parser is off by an ulp, which
    # would spoil an exactness check that holds in memory
    a = pd.read_csv(plain / "effects.csv", float_precision="round_trip")
    b = pd.read_csv(scaled / "effects.csv", float_precision="round_trip")
    assert {"covariate", "category", "cluster"} <= set(a.columns)
    mask = a["covariate"] == "x_cluster1"
    for col in ("q10", "q50", "q90"):
        np.testing.assert_array_equal(
            b.loc[mask, col].to_numpy(), 100.0 * a.loc[mask, col].to_numpy()
        )
        np.testing.assert_array_equal(
            b.loc[~mask, col].to_numpy(), a.loc[~mask, col].to_numpy()
        )


def test_effects_requires_partition(tmp_path, fit_dir):
    code = _run("effects", "--chain", str(fit_dir), "--output-dir", str(tmp_path))
    assert code == 1  # free chain, no --partition given


def test_diagnose_command(tmp_path, fit_dir):
    code = _run("diagnose", "--chain", str(fit_dir), "--output-dir", str(tmp_path))
    assert code == 0
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert list(summary.columns) == ["parameter", "mean", "sd", "iact", "ess"]
    traces = pd.read_csv(tmp_path / "traces.csv")
    assert len(traces) == 25
    assert {"draw", "alpha", "n_clusters", "log_likelihood"} <= set(traces.columns)


def test_geweke_command(tmp_path):
    code = _run(
        "geweke", "--samples", "200", "--seed", "0", "--output-dir", str(tmp_path)
    )
    assert code == 0
    table = pd.read_csv(tmp_path / "geweke.csv")
    assert len(table) == 58
    assert list(table.columns) == ["statistic", "mean_marginal", "mean_successive", "se", "z"]


def test_config_file_with_cli_override(tmp_path, sim_dir):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# fit settings\n"
        "burnin = 10\n"
        "draws = 30\n"
        "lag = 0\n"
        "no-standardize = true\n"
        "seed = 6\n"
        "ignored-by-fit = whatever\n"
    )
    out = tmp_path / "out"
    code = _run(
        "fit", "--data", str(sim_dir / "dataset.csv"), "--config", str(cfg),
        "--draws", "12", "--output-dir", str(out),
    )
    assert code == 0
    chain = load_chain(out / "chain")
    assert chain.config.n_burnin == 10  # from file
    assert chain.n_draws == 12          # flag overrides file
    assert chain.seed == 6


def test_config_file_bad_line(tmp_path, sim_dir):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this is not a pair\n")
    code = _run(
        "fit", "--data", str(sim_dir / "dataset.csv"), "--config", str(cfg),
        "--output-dir", str(tmp_path),
    )
    assert code == 1


def test_usage_errors_exit_nonzero(capsys):
    assert _run() != 0
    assert _run("frobnicate") != 0
    assert _run("fit") != 0          # missing --data
    assert _run("fit", "--data", "x.csv", "--no-such-flag") != 0
    capsys.readouterr()


def test_missing_input_reports_error(tmp_path, capsys):
    code = _run(
        "fit", "--data", str(tmp_path / "absent.csv"), "--categories", "a,b",
        "--output-dir", str(tmp_path),
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err
