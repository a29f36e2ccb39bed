"""Command-line surface: simulate / fit / partition / effects / diagnose / geweke.

Every subcommand takes the global flags --seed, --threads, --output-dir and
--config.  The config file holds one `key = value` pair per line, keys
mirroring flag names (dashes or underscores); values given on the command
line override the file.  Unknown flags or subcommands print usage and exit
nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .diagnostics import chain_summary
from .dp import DpConfig
from .effects import average_posterior_effects, effects_table
from .geweke import geweke_test
from .io import (
    IngestionSpec,
    load_chain,
    load_chain_panel,
    load_panel,
    save_chain,
    write_panel,
)
from .partition import posterior_similarity, search_optimal_partition
from .sampler import SamplerConfig, run_mcmc, two_stage_fit
from .simulate import Dimensions, separated_truth, simulate_panel

__all__ = ["cli_dispatch", "main"]


def _read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _config_argv(values: dict, parser: argparse.ArgumentParser) -> list:
    """Translate config-file pairs into argv tokens the subparser accepts.

    Booleans map to bare flags (true) or nothing (false); everything else
    becomes `--key value`.  Keys the subcommand does not define are ignored
    so one file can serve several subcommands.
    """
    known = {}
    for action in parser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:].replace("-", "_")] = (opt, action)
    argv = []
    for key, value in values.items():
        if key not in known:
            continue
        opt, action = known[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreConstAction)):
            low = value.lower()
            if low in _TRUE:
                argv.append(opt)
            elif low not in _FALSE:
                raise ValueError(f"config key {key!r} expects a boolean, got {value!r}")
        elif isinstance(action, argparse._AppendAction):
            for part in value.split(","):
                argv += [opt, part.strip()]
        else:
            argv += [opt, value]
    return argv


def _comma_list(text: str) -> tuple:
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--seed", type=int, default=0, help="master RNG seed")
    sub.add_argument("--threads", type=int, default=1, help="worker threads for psm/search")
    sub.add_argument("--output-dir", default=".", help="directory for all outputs")
    sub.add_argument("--config", default=None, help="key=value file mirroring the flags")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnppc",
        description="Partial-clustering multinomial panel sampler and tooling",
    )
    subs = parser.add_subparsers(dest="command", required=True, metavar="command")

    sim = subs.add_parser("simulate", help="draw a synthetic panel and ground truth")
    _add_common(sim)
    sim.add_argument("--units", type=int, default=120)
    sim.add_argument("--periods", type=int, default=8)
    sim.add_argument("--categories", type=int, default=3)
    sim.add_argument("--k-cluster", type=int, default=1, help="cluster covariates beside the intercept")
    sim.add_argument("--k-global", type=int, default=1)
    sim.add_argument("--clusters", type=int, default=None,
                     help="well-separated truth with this many clusters; default draws from the prior")
    sim.add_argument("--gap", type=float, default=2.0, help="coefficient separation for --clusters")
    sim.add_argument("--trials", type=int, default=20)

    fit = subs.add_parser("fit", help="run the sampler on a long-format CSV")
    _add_common(fit)
    fit.add_argument("--data", required=True, help="input CSV")
    fit.add_argument("--spec", default=None, help="ingestion spec JSON (overrides column flags)")
    fit.add_argument("--unit-col", default="unit")
    fit.add_argument("--time-col", default="period")
    fit.add_argument("--categories", type=_comma_list, default=None, help="category column names")
    fit.add_argument("--cluster-covariates", type=_comma_list, default=())
    fit.add_argument("--global-covariates", type=_comma_list, default=())
    fit.add_argument("--shares", action="store_true", help="category columns hold shares, not counts")
    fit.add_argument("--share-precision", type=int, default=1000)
    fit.add_argument("--lag", type=int, default=1)
    fit.add_argument("--no-standardize", action="store_true")
    fit.add_argument("--burnin", type=int, default=5000)
    fit.add_argument("--draws", type=int, default=10000)
    fit.add_argument("--thin", type=int, default=1)
    fit.add_argument("--init", choices=("single", "random-k"), default="single")
    fit.add_argument("--init-k", type=int, default=8)
    fit.add_argument("--a-alpha", type=float, default=3.0)
    fit.add_argument("--b-alpha", type=float, default=2.0)
    fit.add_argument("--n-aux", type=int, default=3)
    fit.add_argument("--store-unit-coefficients", action="store_true")
    fit.add_argument("--two-stage", action="store_true",
                     help="free run, Binder partition, then a conditional re-run at half length")
    fit.add_argument("--fix-partition", default=None, metavar="FILE",
                     help="file with one cluster label per unit; skips allocation moves")
    fit.add_argument("--restarts", type=int, default=16, help="partition search restarts (two-stage)")
    fit.add_argument("--format", choices=("npy", "csv"), default="npy")
    fit.add_argument("--chain-name", default="chain")

    part = subs.add_parser("partition", help="Binder-optimal partition from a saved chain")
    _add_common(part)
    part.add_argument("--chain", required=True, help="chain directory")
    part.add_argument("--restarts", type=int, default=16)
    part.add_argument("--max-clusters", type=int, default=None)

    eff = subs.add_parser("effects", help="average marginal effects on a fixed partition")
    _add_common(eff)
    eff.add_argument("--chain", required=True, help="fixed-partition chain directory")
    eff.add_argument("--partition", default=None,
                     help="partition CSV; defaults to the chain's own fixed partition")
    eff.add_argument("--covariates", type=_comma_list, default=None)
    eff.add_argument("--scale", action="append", default=None, metavar="NAME=FACTOR",
                     help="rescale one covariate's effects (repeatable)")

    diag = subs.add_parser("diagnose", help="ESS/autocorrelation tables and trace extracts")
    _add_common(diag)
    diag.add_argument("--chain", required=True)

    gwk = subs.add_parser("geweke", help="joint-distribution sampler calibration test")
    _add_common(gwk)
    gwk.add_argument("--samples", type=int, default=20000, help="samples per simulator side")
    gwk.add_argument("--mutation", choices=("none", "kappa", "alpha_odds"), default="none")
    gwk.add_argument("--trials", type=int, default=2)

    return parser


def _load_fit_panel(args):
    if args.spec is not None:
        spec = IngestionSpec.from_dict(json.loads(Path(args.spec).read_text()))
    else:
        sidecar = Path(args.data).with_name("ingestion.json")
        if args.categories is None and sidecar.exists():
            spec = IngestionSpec.from_dict(json.loads(sidecar.read_text()))
        elif args.categories is None:
            raise ValueError("pass --categories (or --spec / an ingestion.json next to the data)")
        else:
            spec = IngestionSpec(
                unit_column=args.unit_col,
                time_column=args.time_col,
                category_columns=args.categories,
                cluster_covariates=args.cluster_covariates,
                global_covariates=args.global_covariates,
                category_kind="shares" if args.shares else "counts",
                lag=args.lag,
                standardize=not args.no_standardize,
                share_precision=args.share_precision,
            )
    return load_panel(args.data, spec)


def _write_partition(path, data, labels):
    lines = ["unit,cluster"]
    lines += [f"{u},{int(c)}" for u, c in zip(data.unit_ids, labels)]
    Path(path).write_text("\n".join(lines) + "\n")


def _cmd_simulate(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    dims = Dimensions(args.units, args.periods, args.categories, args.k_cluster, args.k_global)
    truth = separated_truth(dims, args.clusters, args.gap, rng) if args.clusters else None
    data, truth = simulate_panel(dims, rng, truth=truth, trials=args.trials)
    spec = write_panel(data, out / "dataset.csv")
    (out / "ingestion.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    payload = {
        "assignments": truth.assignments.tolist(),
        "beta_star": truth.beta_star.tolist(),
        "theta": truth.theta.tolist(),
        "alpha": truth.alpha,
        "seed": args.seed,
    }
    (out / "truth.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'dataset.csv'} ({data.n_units} units x {data.n_periods} periods, "
          f"{truth.beta_star.shape[0]} clusters)")
    return 0


def _cmd_fit(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    data, record = _load_fit_panel(args)
    fixed = None
    if args.fix_partition is not None:
        raw = np.loadtxt(args.fix_partition, dtype=np.int64, ndmin=1)
        fixed = raw
    config = SamplerConfig(
        n_burnin=args.burnin,
        n_retained=args.draws,
        thin=args.thin,
        seed=args.seed,
        dp=DpConfig(a_alpha=args.a_alpha, b_alpha=args.b_alpha, n_aux=args.n_aux),
        fixed_partition=fixed,
        init=args.init,
        init_k=args.init_k,
        store_unit_coefficients=args.store_unit_coefficients,
    )
    if args.two_stage:
        if fixed is not None:
            raise ValueError("--two-stage and --fix-partition are mutually exclusive")
        stage1, labels, stage2 = two_stage_fit(
            data, config, n_restarts=args.restarts, n_threads=args.threads
        )
        save_chain(stage1, out / f"{args.chain_name}-stage1", fmt=args.format)
        chain_dir = save_chain(
            stage2, out / args.chain_name, fmt=args.format, data=data, standardization=record
        )
        _write_partition(chain_dir / "partition.csv", data, labels)
        print(f"stage 1: {stage1.n_draws} draws, stage 2: {stage2.n_draws} draws on "
              f"{labels.max() + 1} clusters -> {chain_dir}")
    else:
        chain = run_mcmc(data, config)
        chain_dir = save_chain(
            chain, out / args.chain_name, fmt=args.format, data=data, standardization=record
        )
        print(f"{chain.n_draws} draws -> {chain_dir}")
    return 0


def _cmd_partition(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chain = load_chain(args.chain)
    data, _ = load_chain_panel(args.chain)
    psm = posterior_similarity(chain.assignments, n_threads=args.threads)
    labels = search_optimal_partition(
        psm.psm,
        n_restarts=args.restarts,
        max_clusters=args.max_clusters,
        rng=np.random.default_rng(args.seed),
        n_threads=args.threads,
    )
    np.savetxt(out / "psm.csv", psm.psm, fmt="%.17g", delimiter=",")
    _write_partition(out / "partition.csv", data, labels)
    print(f"{labels.max() + 1} clusters -> {out / 'partition.csv'}")
    return 0


def _parse_scales(pairs):
    scales = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"--scale expects NAME=FACTOR, got {pair!r}")
        name, factor = pair.split("=", 1)
        scales[name.strip()] = float(factor)
    return scales


def _cmd_effects(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chain = load_chain(args.chain)
    data, _ = load_chain_panel(args.chain)
    if args.partition is not None:
        import pandas as pd

        labels = pd.read_csv(args.partition)["cluster"].to_numpy(dtype=np.int64)
    elif chain.config.fixed_partition is not None:
        labels = chain.config.fixed_partition
    else:
        raise ValueError("chain has no fixed partition; pass --partition")
    summaries = average_posterior_effects(
        chain, data, labels,
        covariates=list(args.covariates) if args.covariates else None,
        scales=_parse_scales(args.scale),
    )
    table = effects_table(summaries)
    table.to_csv(out / "effects.csv", index=False, float_format="%.17g")
    print(f"{len(table)} effect rows -> {out / 'effects.csv'}")
    return 0


def _cmd_diagnose(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    import pandas as pd

    chain = load_chain(args.chain)
    chain_summary(chain).to_csv(out / "summary.csv", index=False, float_format="%.17g")
    traces = pd.DataFrame(
        {
            "draw": np.arange(chain.n_draws),
            "alpha": chain.alpha,
            "n_clusters": chain.n_clusters,
            "log_likelihood": chain.log_likelihood,
        }
    )
    traces.to_csv(out / "traces.csv", index=False, float_format="%.17g")
    print(f"summary + traces -> {out}")
    return 0


def _cmd_geweke(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    mutation = None if args.mutation == "none" else args.mutation
    result = geweke_test(
        args.samples,
        rng=np.random.default_rng(args.seed),
        mutation=mutation,
        trials=args.trials,
    )
    result.table().to_csv(out / "geweke.csv", index=False, float_format="%.17g")
    print(f"{len(result.names)} statistics, max |z| = {result.max_abs_z:.2f} "
          f"({args.samples} samples/side, mutation={args.mutation})")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "partition": _cmd_partition,
    "effects": _cmd_effects,
    "diagnose": _cmd_diagnose,
    "geweke": _cmd_geweke,
}


def cli_dispatch(argv) -> int:
    parser = _build_parser()
    argv = list(argv)
    try:
        command = next((a for a in argv if not a.startswith("-")), None)
        if "--config" in argv and command in _COMMANDS:
            cfg_path = argv[argv.index("--config") + 1]
            sub = parser._subparsers._group_actions[0].choices[command]
            extra = _config_argv(_read_config_file(cfg_path), sub)
            argv = [command] + extra + [a for a in argv if a != command]
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
