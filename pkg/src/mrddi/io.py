"""Dataset ingestion, run configuration and artifact writers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .data import Dataset, validate_dataset
from .errors import ConfigError, CsvParseError, SchemaError, ValidationError
from .estimator import IDENTITY, LOG, METHODS
from .propensity import FACTORED, MULTINOMIAL

SCHEMA_VERSION = 1
DEFAULT_R = 200


@dataclass(frozen=True)
class SimulationBlock:
    dgp: str = "A"
    n: int = 2000
    runs: int = 250
    bootstrap_R: int = DEFAULT_R
    prevalences: tuple = (0.30,)
    xis: tuple = (1.0,)
    model_set: object = "correct"  # "correct", "all_wrong" or {label: formula}
    balance_covariates: tuple = ("X2", "X3")
    calibration_mc: int = 10**6
    oracle_mc: int = 10**7


@dataclass(frozen=True)
class RunConfig:
    command: str
    dataset_path: Optional[str] = None
    outcome: str = "Y"
    treat_a: str = "A"
    treat_b: str = "B"
    id_column: Optional[str] = "id"
    covariates: Optional[tuple] = None
    model_formulas: dict = field(default_factory=dict)
    model_family: str = MULTINOMIAL
    methods: tuple = ("el",)
    iptw_model_label: Optional[str] = None
    balance_covariates: tuple = ()
    link: str = IDENTITY
    bootstrap_R: int = DEFAULT_R
    seed: int = 0
    threads: int = 1
    output_dir: str = "output"
    simulation: Optional[SimulationBlock] = None

    @property
    def method(self):
        return self.methods[0] if len(self.methods) == 1 else self.methods


_TOP_KEYS = {
    "command", "dataset_path", "outcome", "treat_a", "treat_b", "id_column", "covariates",
    "model_formulas", "models", "model_family", "method", "iptw_model_label",
    "balance_covariates", "link", "bootstrap_R", "seed", "threads", "output_dir", "simulation",
}


def _tuple(value, what):
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,)
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{what} must be a list")
    return tuple(value)


def config_from_mapping(raw: dict, command: Optional[str] = None, **overrides) -> RunConfig:
    """Build and validate a RunConfig; ``overrides`` (flag values) win over the file."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    raw = dict(raw)
    for k, v in overrides.items():
        if v is not None:
            raw[k] = v
    command = command or raw.get("command")
    if command not in ("estimate", "diagnose", "simulate"):
        raise ConfigError(f"command must be estimate, diagnose or simulate, got {command!r}")
    models = raw.get("model_formulas", raw.get("models", {})) or {}
    if not isinstance(models, dict):
        raise ConfigError("model_formulas must map labels to formula strings")
    models = {str(k): str(v) for k, v in models.items()}
    methods = tuple(m.lower() for m in _tuple(raw.get("method", "el"), "method"))
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r} (expected iptw, el or melcb)")
    balance = _tuple(raw.get("balance_covariates"), "balance_covariates")
    link = raw.get("link", IDENTITY)
    if link not in (IDENTITY, LOG):
        raise ConfigError(f"link must be identity or log, got {link!r}")
    family = raw.get("model_family", MULTINOMIAL)
    if family not in (MULTINOMIAL, FACTORED):
        raise ConfigError(f"model_family must be {MULTINOMIAL} or {FACTORED}")
    iptw_label = raw.get("iptw_model_label")
    R = int(raw.get("bootstrap_R", DEFAULT_R))
    threads = int(raw.get("threads", 1))
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    sim = None
    if command in ("estimate", "diagnose"):
        if not raw.get("dataset_path"):
            raise ConfigError(f"{command} needs dataset_path")
        if not models:
            raise ConfigError(f"{command} needs at least one entry in model_formulas")
        if "iptw" in methods:
            if iptw_label is None and len(models) != 1:
                raise ConfigError("method iptw needs exactly one model: set iptw_model_label")
            if iptw_label is not None and iptw_label not in models:
                raise ConfigError(f"iptw_model_label {iptw_label!r} is not in model_formulas")
        if "melcb" in methods and not balance:
            raise ConfigError("method melcb needs a nonempty balance_covariates list")
        if command == "estimate" and R < 2:
            raise ConfigError("bootstrap_R must be at least 2")
    else:
        sim = _simulation_block(raw.get("simulation") or {})
    return RunConfig(
        command=command,
        dataset_path=raw.get("dataset_path"),
        outcome=raw.get("outcome", "Y"),
        treat_a=raw.get("treat_a", "A"),
        treat_b=raw.get("treat_b", "B"),
        id_column=raw.get("id_column", "id"),
        covariates=_tuple(raw["covariates"], "covariates") if raw.get("covariates") else None,
        model_formulas=models,
        model_family=family,
        methods=methods,
        iptw_model_label=iptw_label,
        balance_covariates=balance,
        link=link,
        bootstrap_R=R,
        seed=int(raw.get("seed", 0)),
        threads=threads,
        output_dir=str(raw.get("output_dir", "output")),
        simulation=sim,
    )


def _simulation_block(raw):
    allowed = set(SimulationBlock.__dataclass_fields__)
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown simulation key(s): {', '.join(sorted(unknown))}")
    blk = SimulationBlock(**{
        **raw,
        **{k: tuple(raw[k]) for k in ("prevalences", "xis", "balance_covariates")
           if k in raw and isinstance(raw[k], (list, tuple))},
    })
    if blk.dgp not in ("A", "B"):
        raise ConfigError("simulation.dgp must be A or B")
    if blk.n < 4 or blk.runs < 1:
        raise ConfigError("simulation needs n >= 4 and runs >= 1")
    if blk.bootstrap_R != 0 and blk.bootstrap_R < 2:
        raise ConfigError("simulation.bootstrap_R must be 0 or at least 2")
    if not all(0 < p < 1 for p in blk.prevalences):
        raise ConfigError("prevalences must lie in (0, 1)")
    if not (blk.model_set in ("correct", "all_wrong") or isinstance(blk.model_set, dict)):
        raise ConfigError("simulation.model_set must be 'correct', 'all_wrong' or a mapping")
    return blk


def load_config(path, command=None, **overrides) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from None
    cfg = config_from_mapping(raw, command, **overrides)
    if cfg.dataset_path and not Path(cfg.dataset_path).is_absolute():
        base = Path(path).resolve().parent
        cfg = _replace(cfg, dataset_path=str(base / cfg.dataset_path))
    return cfg


def _replace(cfg, **kw):
    from dataclasses import replace
    return replace(cfg, **kw)


def load_csv(path, config: RunConfig) -> Dataset:
    """Read a UTF-8 CSV with a header row into a validated Dataset.

    Data rows are numbered from 1 in error messages.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        rows = list(reader)
    required = [config.outcome, config.treat_a, config.treat_b]
    if config.covariates is not None:
        required += list(config.covariates)
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    if config.covariates is not None:
        cov_names = list(config.covariates)
    else:
        skip = {config.outcome, config.treat_a, config.treat_b, config.id_column}
        cov_names = [h for h in header if h not in skip]
    if not cov_names:
        raise SchemaError("no covariate columns")
    wanted = [config.outcome, config.treat_a, config.treat_b] + cov_names
    pos = {h: i for i, h in enumerate(header)}
    data = np.empty((len(rows), len(wanted)))
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise SchemaError(f"row {r} has {len(row)} fields, header has {len(header)}")
        for j, col in enumerate(wanted):
            cell = row[pos[col]].strip()
            try:
                val = float(cell)
            except ValueError:
                raise CsvParseError(r, col, cell) from None
            if not math.isfinite(val):
                raise CsvParseError(r, col, cell)
            data[r - 1, j] = val
    if data.shape[0] == 0:
        raise SchemaError(f"{path} has no data rows")
    d = Dataset(data[:, 0], data[:, 1], data[:, 2], data[:, 3:], tuple(cov_names))
    report = validate_dataset(d)
    if not report.ok:
        raise ValidationError(
            "dataset failed validation: " + "; ".join(v.detail for v in report.fatal), report.fatal)
    return d


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, payload):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(payload), fh, indent=2)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(float(v)) else repr(float(v))
    return v
