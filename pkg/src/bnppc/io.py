"""Dataset ingestion, panel serialization, and chain persistence.

Input datasets are long-format CSV — one row per (unit, period), category
count or share columns next to the covariate columns, header-driven, UTF-8,
``.`` decimal separator.  Chains are saved as a directory holding a JSON
manifest (schema ``bnppc-chain/1``) plus one flat array file per parameter
block, either ``.npy`` or ``%.17g`` CSV; the manifest is the compatibility
contract and is written with sorted keys so identical runs serialize to
identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .data import PanelData
from .dp import DpConfig
from .gauss import ModelPrior, PriorSpec
from .sampler import ChainOutput, SamplerConfig

__all__ = [
    "IngestionSpec",
    "StandardizationRecord",
    "load_panel",
    "write_panel",
    "save_chain",
    "load_chain",
    "load_chain_panel",
]

MANIFEST_SCHEMA = "bnppc-chain/1"


@dataclass(frozen=True)
class IngestionSpec:
    """Column roles and preprocessing switches for long-format CSV input.

    category_kind selects how the J category columns are read: "counts"
    (non-negative integers; trials are their row sums) or "shares" (each in
    [0,1], rows summing to 1, converted to counts out of share_precision
    pseudo-trials).  Covariates are lagged so period t's response is paired
    with period t-lag's covariates, dropping the first `lag` response
    periods.
    """

    unit_column: str
    time_column: str
    category_columns: tuple
    cluster_covariates: tuple = ()
    global_covariates: tuple = ()
    category_kind: str = "counts"
    lag: int = 1
    standardize: bool = True
    share_precision: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "category_columns", tuple(self.category_columns))
        object.__setattr__(self, "cluster_covariates", tuple(self.cluster_covariates))
        object.__setattr__(self, "global_covariates", tuple(self.global_covariates))
        if len(self.category_columns) < 2:
            raise ValueError("need at least two category columns")
        if self.category_kind not in ("counts", "shares"):
            raise ValueError(f"unknown category_kind {self.category_kind!r}")
        if self.lag < 0:
            raise ValueError("lag must be non-negative")
        if self.share_precision < 1:
            raise ValueError("share_precision must be positive")
        roles = (
            [self.unit_column, self.time_column]
            + list(self.category_columns)
            + list(self.cluster_covariates)
            + list(self.global_covariates)
        )
        if len(set(roles)) != len(roles):
            raise ValueError("column roles overlap; every column may serve one role")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "IngestionSpec":
        return cls(**payload)


@dataclass(frozen=True)
class StandardizationRecord:
    """Means and scales divided out of the covariates during ingestion.

    A coefficient or marginal effect reported per one standardized unit of
    column ``c`` maps back to original covariate units by multiplying with
    ``effect_scale(c)`` = 1/sd; columns that were not standardized get
    factor 1.
    """

    columns: tuple = ()
    means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scales: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=np.float64))
        if not (len(self.columns) == self.means.size == self.scales.size):
            raise ValueError("record fields disagree on column count")
        if self.scales.size and np.any(self.scales <= 0):
            raise ValueError("scales must be positive")

    def effect_scale(self, column: str) -> float:
        if column in self.columns:
            return float(1.0 / self.scales[self.columns.index(column)])
        return 1.0

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StandardizationRecord":
        return cls(**payload)


def _numeric_block(df: pd.DataFrame, columns, path) -> np.ndarray:
    out = np.empty((len(df), len(columns)))
    for k, name in enumerate(columns):
        if name not in df.columns:
            raise ValueError(f"{path}: missing required column {name!r}")
        try:
            out[:, k] = pd.to_numeric(df[name], errors="raise").to_numpy(dtype=np.float64)
        except (ValueError, TypeError) as exc:
            raise ValueError(f"{path}: non-numeric values in column {name!r}") from exc
    return out


def _shares_to_counts(shares: np.ndarray, precision: int) -> np.ndarray:
    """Round share rows to integer counts summing exactly to `precision`.

    Largest-remainder rule: floor everything, then hand the leftover units
    to the largest fractional parts (ties to the lower column index).
    """
    scaled = shares * precision
    base = np.floor(scaled).astype(np.int64)
    frac = scaled - base
    short = precision - base.sum(axis=-1)
    order = np.argsort(-frac, axis=-1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.broadcast_to(np.arange(shares.shape[-1]), shares.shape), axis=-1)
    return base + (ranks < short[..., None])


def load_panel(path, spec: IngestionSpec):
    """Read a long CSV into a PanelData plus its StandardizationRecord.

    Requires a balanced panel; unbalanced input raises with the missing
    (unit, period) cells listed.  Category columns are validated per
    spec.category_kind, covariates are lagged by spec.lag (so the first
    `lag` response periods drop out) and, if spec.standardize, centered and
    scaled to unit variance with the constants recorded.  The intercept is
    appended after standardization and is never rescaled.
    """
    path = Path(path)
    df = pd.read_csv(path, float_precision="round_trip")
    for name in (spec.unit_column, spec.time_column):
        if name not in df.columns:
            raise ValueError(f"{path}: missing required column {name!r}")

    units = sorted(pd.unique(df[spec.unit_column]).tolist())
    periods = sorted(pd.unique(df[spec.time_column]).tolist())
    n, p = len(units), len(periods)
    key = pd.MultiIndex.from_arrays([df[spec.unit_column], df[spec.time_column]])
    if key.duplicated().any():
        dupes = key[key.duplicated()].tolist()[:10]
        raise ValueError(f"{path}: duplicate (unit, period) rows: {dupes}")
    have = set(key)
    missing = [(u, t) for u in units for t in periods if (u, t) not in have]
    if missing:
        shown = ", ".join(map(str, missing[:10]))
        more = f" and {len(missing) - 10} more" if len(missing) > 10 else ""
        raise ValueError(f"{path}: unbalanced panel, missing cells: {shown}{more}")

    df = df.set_index(key).loc[pd.MultiIndex.from_product([units, periods])]
    j = len(spec.category_columns)
    cats = _numeric_block(df, spec.category_columns, path).reshape(n, p, j)
    if spec.category_kind == "counts":
        if np.any(cats < 0) or np.any(np.abs(cats - np.round(cats)) > 1e-9):
            raise ValueError(f"{path}: count columns must hold non-negative integers")
        y_all = np.round(cats).astype(np.int64)
        trials_all = y_all.sum(axis=-1)
    else:
        if np.any(cats < -1e-12) or np.any(cats > 1 + 1e-12):
            raise ValueError(f"{path}: share values outside [0, 1]")
        sums = cats.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            bad = int(np.sum(np.abs(sums - 1.0) > 1e-6))
            raise ValueError(f"{path}: {bad} share rows do not sum to 1 within 1e-6")
        y_all = _shares_to_counts(np.clip(cats, 0.0, 1.0), spec.share_precision)
        trials_all = np.full((n, p), spec.share_precision, dtype=np.int64)

    kc, kg = len(spec.cluster_covariates), len(spec.global_covariates)
    xc_all = _numeric_block(df, spec.cluster_covariates, path).reshape(n, p, kc)
    xg_all = _numeric_block(df, spec.global_covariates, path).reshape(n, p, kg)
    if not (np.all(np.isfinite(xc_all)) and np.all(np.isfinite(xg_all))):
        raise ValueError(f"{path}: covariates contain non-finite values")

    if spec.lag >= p:
        raise ValueError(f"{path}: lag={spec.lag} leaves no modeled periods out of {p}")
    t = p - spec.lag
    y = y_all[:, spec.lag :]
    trials = trials_all[:, spec.lag :]
    xc = xc_all[:, :t].copy()
    xg = xg_all[:, :t].copy()
    period_labels = [periods[spec.lag + k] for k in range(t)]

    record = StandardizationRecord()
    if spec.standardize and kc + kg:
        names = list(spec.cluster_covariates) + list(spec.global_covariates)
        stacked = np.concatenate([xc.reshape(n * t, kc), xg.reshape(n * t, kg)], axis=1)
        means = stacked.mean(axis=0)
        scales = stacked.std(axis=0)
        flat = np.abs(scales) < 1e-12
        if np.any(flat):
            bad = [names[k] for k in np.nonzero(flat)[0]]
            raise ValueError(f"{path}: constant covariate columns cannot be standardized: {bad}")
        xc -= means[:kc]
        xc /= scales[:kc]
        xg -= means[kc:]
        xg /= scales[kc:]
        record = StandardizationRecord(columns=names, means=means, scales=scales)

    data = PanelData(
        y=y,
        trials=trials,
        x_cluster=np.concatenate([np.ones((n, t, 1)), xc], axis=2),
        x_global=xg,
        unit_ids=units,
        period_labels=period_labels,
        cluster_covariate_names=["intercept"] + list(spec.cluster_covariates),
        global_covariate_names=list(spec.global_covariates),
    )
    return data, record


def write_panel(data: PanelData, path, category_names=None) -> IngestionSpec:
    """Write a PanelData to long CSV and return the spec that re-loads it.

    The returned spec uses lag=0 and standardize=False, so loading the file
    back yields value-identical arrays (floats are printed with %.17g,
    which round-trips float64 exactly).  The intercept column is implied,
    not written.
    """
    if category_names is None:
        category_names = [f"cat{j}" for j in range(data.n_categories)]
    if len(category_names) != data.n_categories:
        raise ValueError("category_names length must equal n_categories")
    cluster_names = list(data.cluster_covariate_names[1:])
    global_names = list(data.global_covariate_names)

    n, t = data.n_units, data.n_periods
    rows = {
        "unit": np.repeat(np.asarray(data.unit_ids, dtype=object), t),
        "period": np.tile(np.asarray(data.period_labels, dtype=object), n),
    }
    for j, name in enumerate(category_names):
        rows[name] = data.y[:, :, j].reshape(-1)
    for k, name in enumerate(cluster_names):
        rows[name] = data.x_cluster[:, :, k + 1].reshape(-1)
    for k, name in enumerate(global_names):
        rows[name] = data.x_global[:, :, k].reshape(-1)
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.17g")
    return IngestionSpec(
        unit_column="unit",
        time_column="period",
        category_columns=tuple(category_names),
        cluster_covariates=tuple(cluster_names),
        global_covariates=tuple(global_names),
        category_kind="counts",
        lag=0,
        standardize=False,
    )


def _jsonify(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonify(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    return value


def _config_from_payload(payload: dict) -> SamplerConfig:
    payload = dict(payload)
    payload["dp"] = DpConfig(**payload["dp"])
    if payload.get("prior") is not None:
        payload["prior"] = ModelPrior(
            beta=PriorSpec(**payload["prior"]["beta"]),
            theta=PriorSpec(**payload["prior"]["theta"]),
        )
    if payload.get("fixed_partition") is not None:
        payload["fixed_partition"] = np.asarray(payload["fixed_partition"], dtype=np.int64)
    return SamplerConfig(**payload)


_FLOAT_FMT = "%.17g"


def _write_array(arr: np.ndarray, stem: str, directory: Path, fmt: str) -> dict:
    entry = {"dtype": str(arr.dtype), "shape": list(arr.shape)}
    if fmt == "npy":
        entry["file"] = f"{stem}.npy"
        np.save(directory / entry["file"], arr)
    else:
        entry["file"] = f"{stem}.csv"
        flat = arr.reshape(arr.shape[0] if arr.ndim else 1, -1)
        num_fmt = "%d" if arr.dtype.kind in "iu" else _FLOAT_FMT
        np.savetxt(directory / entry["file"], flat, fmt=num_fmt, delimiter=",")
    return entry


def _read_array(entry: dict, directory: Path) -> np.ndarray:
    path = directory / entry["file"]
    shape = tuple(entry["shape"])
    if path.suffix == ".npy":
        arr = np.load(path)
    else:
        arr = np.loadtxt(path, delimiter=",", dtype=np.dtype(entry["dtype"]), ndmin=2)
    return arr.reshape(shape).astype(np.dtype(entry["dtype"]), copy=False)


def save_chain(
    chain: ChainOutput,
    directory,
    fmt: str = "npy",
    data: Optional[PanelData] = None,
    standardization: Optional[StandardizationRecord] = None,
) -> Path:
    """Persist retained draws under `directory` with a versioned manifest.

    fmt is "npy" or "csv".  The ragged β* list is stored as one stacked
    array plus draw offsets.  Timing is deliberately not serialized, so a
    re-run with the same seed/config/data writes byte-identical files.
    Passing `data` echoes the modeled panel into the directory, which lets
    downstream commands recover covariates without the original CSV.
    """
    if fmt not in ("npy", "csv"):
        raise ValueError(f"unknown chain format {fmt!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    beta_stack = np.concatenate(chain.beta_star, axis=0)
    offsets = np.zeros(chain.n_draws + 1, dtype=np.int64)
    np.cumsum([b.shape[0] for b in chain.beta_star], out=offsets[1:])

    files = {}
    files["assignments"] = _write_array(chain.assignments, "assignments", directory, fmt)
    files["n_clusters"] = _write_array(chain.n_clusters, "n_clusters", directory, fmt)
    files["alpha"] = _write_array(chain.alpha, "alpha", directory, fmt)
    files["theta"] = _write_array(chain.theta, "theta", directory, fmt)
    files["log_likelihood"] = _write_array(
        chain.log_likelihood, "log_likelihood", directory, fmt
    )
    files["beta_stack"] = _write_array(beta_stack, "beta_stack", directory, fmt)
    files["beta_offsets"] = _write_array(offsets, "beta_offsets", directory, fmt)
    if chain.unit_coefficients is not None:
        files["unit_coefficients"] = _write_array(
            chain.unit_coefficients, "unit_coefficients", directory, fmt
        )

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "format": fmt,
        "seed": int(chain.seed),
        "dimensions": {
            "n_draws": int(chain.n_draws),
            "n_units": int(chain.assignments.shape[1]),
            "n_categories": int(chain.theta.shape[2] + 1),
            "k_cluster": int(beta_stack.shape[1]),
            "k_global": int(chain.theta.shape[1]),
        },
        "config": _jsonify(chain.config),
        "files": files,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )

    if data is not None:
        reload_spec = write_panel(data, directory / "data.csv")
        (directory / "ingestion.json").write_text(
            json.dumps(reload_spec.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    if standardization is not None:
        (directory / "standardization.json").write_text(
            json.dumps(standardization.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    return directory


def load_chain(directory) -> ChainOutput:
    """Rebuild a ChainOutput from a bnppc-chain/1 directory."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"{directory}: unknown manifest schema {manifest.get('schema')!r}")
    files = manifest["files"]
    stack = _read_array(files["beta_stack"], directory)
    offsets = _read_array(files["beta_offsets"], directory)
    beta_star = [stack[offsets[d] : offsets[d + 1]] for d in range(offsets.size - 1)]
    unit_coefficients = None
    if "unit_coefficients" in files:
        unit_coefficients = _read_array(files["unit_coefficients"], directory)
    return ChainOutput(
        assignments=_read_array(files["assignments"], directory),
        n_clusters=_read_array(files["n_clusters"], directory),
        alpha=_read_array(files["alpha"], directory),
        beta_star=beta_star,
        theta=_read_array(files["theta"], directory),
        log_likelihood=_read_array(files["log_likelihood"], directory),
        config=_config_from_payload(manifest["config"]),
        seed=manifest["seed"],
        unit_coefficients=unit_coefficients,
    )


def load_chain_panel(directory):
    """Load the echoed panel (and record) saved next to a chain, if any."""
    directory = Path(directory)
    spec_path = directory / "ingestion.json"
    if not spec_path.exists():
        raise FileNotFoundError(
            f"{directory} holds no echoed dataset; re-run the fit with data echoing "
            "or pass the original CSV explicitly"
        )
    spec = IngestionSpec.from_dict(json.loads(spec_path.read_text()))
    data, _ = load_panel(directory / "data.csv", spec)
    record_path = directory / "standardization.json"
    if record_path.exists():
        return data, StandardizationRecord.from_dict(json.loads(record_path.read_text()))
    return data, StandardizationRecord()
