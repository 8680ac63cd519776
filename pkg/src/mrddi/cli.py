"""Command-line entry point: ``mrddi {estimate,diagnose,simulate} --config FILE``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import simulation as sim
from .data import ARMS, arm_partition
from .diagnostics import PAIR_ORDER, balance_report, pair_label
from .errors import ConfigError, MrddiError, TooManyFailures
from .estimator import EstimationPipeline, arm_weights, bootstrap_many, fit_all, too_many_failures
from .io import load_config, load_csv, write_csv, write_json
from .propensity import PropensityModelSpec
from .weights import WeightSet

log = logging.getLogger("mrddi")

ESTIMATE_COLUMNS = ["Method", "Model", "DDI", "Standard error", "95% CI"]


def build_pipelines(cfg, names):
    specs = tuple(PropensityModelSpec.from_formula(label, text, names, cfg.model_family)
                  for label, text in cfg.model_formulas.items())
    out = []
    for m in cfg.methods:
        if m == "iptw":
            out.append(EstimationPipeline(specs, "iptw", cfg.link, iptw_model=cfg.iptw_model_label))
        elif m == "el":
            out.append(EstimationPipeline(specs, "el", cfg.link))
        else:
            out.append(EstimationPipeline(specs, "melcb", cfg.link, cfg.balance_covariates))
    return out


def _check_balance_names(cfg, d):
    missing = [c for c in cfg.balance_covariates if c not in d.covariate_names]
    if missing:
        raise ConfigError(f"balance covariate(s) not in the dataset: {', '.join(missing)}")


def run_estimate(cfg) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = load_csv(cfg.dataset_path, cfg)
    _check_balance_names(cfg, d)
    pipelines = build_pipelines(cfg, d.covariate_names)
    results = bootstrap_many(d, pipelines, cfg.bootstrap_R, cfg.seed, cfg.threads)
    records, rows = [], []
    for p in pipelines:
        est = results[p.name]
        if isinstance(est, Exception):
            raise est
        if too_many_failures(est):
            raise TooManyFailures(
                f"{p.name}: {est.replicates_failed} of {est.replicates_total} bootstrap replicates failed")
        records.append({
            "name": p.name,
            "method": p.method,
            "models": list(p.model_labels),
            "balance_covariates": list(p.balance_covariates),
            "link": p.link,
            "theta": est.theta,
            "se": est.se,
            "ci": [est.ci_low, est.ci_high],
            "arm_means": {str(arm): m for arm, m in zip(ARMS, est.arm_means)},
            "replicates_total": est.replicates_total,
            "replicates_failed": est.replicates_failed,
        })
        rows.append([p.name.split("-")[0], ", ".join(p.model_labels), est.theta, est.se,
                     f"({est.ci_low!r}, {est.ci_high!r})"])
    write_json(out / "estimate.json", {"command": "estimate", "seed": cfg.seed,
                                       "n": d.n, "estimates": records})
    write_csv(out / "estimate.csv", ESTIMATE_COLUMNS, rows)
    return 0


BALANCE_COLUMNS = (["covariate", "weighting", "psb_overall"]
                   + [f"psb_{arm.label}" for arm in ARMS]
                   + [f"smd_{pair_label(p, q)}" for p, q in PAIR_ORDER])


def _uniform_sets(part):
    return {arm: WeightSet(arm, part[arm], np.full(part.size(arm), 1.0 / part.size(arm)),
                           "unweighted", ()) for arm in ARMS}


def diagnose(d, pipelines):
    """Balance reports for the unweighted sample and each pipeline's weights."""
    part = arm_partition(d)
    reports = [balance_report(d, _uniform_sets(part), "unweighted")]
    fits = fit_all(d, pipelines)
    for p in pipelines:
        for label in p.model_labels:
            if isinstance(fits[label], Exception):
                raise fits[label]
        reports.append(balance_report(d, arm_weights(d, part, fits, p), p.name))
    return reports


def run_diagnose(cfg) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = load_csv(cfg.dataset_path, cfg)
    _check_balance_names(cfg, d)
    reports = diagnose(d, build_pipelines(cfg, d.covariate_names))
    rows = []
    for rep in reports:
        for c in rep.covariates:
            rows.append([c.covariate, rep.weighting, c.psb_overall]
                        + [c.psb_by_arm[arm] for arm in ARMS]
                        + [c.pairwise_smd[pair_label(p, q)] for p, q in PAIR_ORDER])
    write_csv(out / "balance.csv", BALANCE_COLUMNS, rows)
    write_json(out / "balance_summary.json", {
        "command": "diagnose",
        "psb_cutoff": 0.2,
        "smd_cutoff": 0.1,
        "weightings": [{
            "weighting": rep.weighting,
            "n_covariates": len(rep.covariates),
            "n_psb_over_cutoff": rep.n_over_psb_cutoff,
            "n_pairwise_smd_over_cutoff": rep.n_over_smd_cutoff,
        } for rep in reports],
    })
    return 0


def simulation_configs(cfg):
    blk = cfg.simulation
    if blk.model_set == "correct":
        specs = sim.model_specs(sim.CORRECT_SET)
    elif blk.model_set == "all_wrong":
        specs = sim.model_specs(sim.ALL_WRONG_SET)
    else:
        specs = sim.model_specs(blk.model_set)
    for prev in blk.prevalences:
        for xi in blk.xis:
            yield sim.SimulationConfig(
                n=blk.n, xi=float(xi), target_prevalence_00=float(prev), dgp=blk.dgp,
                runs=blk.runs, bootstrap_R=blk.bootstrap_R, model_set=specs,
                balance_covariates=tuple(blk.balance_covariates), seed=cfg.seed,
                calibration_mc=blk.calibration_mc, oracle_mc=blk.oracle_mc,
                workers=cfg.threads)


def run_studies(cfg, progress=None):
    calibrations, truths, reports = {}, {}, []
    for sc in simulation_configs(cfg):
        if sc.target_prevalence_00 not in calibrations:
            calibrations[sc.target_prevalence_00] = sim.calibrate_prevalence(
                sc.dgp, sc.target_prevalence_00, sc.calibration_mc, sc.seed)
        if sc.xi not in truths:
            truths[sc.xi] = sim.oracle_true_ddi(sc.xi, sc.oracle_mc, sc.seed)
        log.info("facet prevalence=%s xi=%s", sc.target_prevalence_00, sc.xi)
        reports.append(sim.run_study(sc, calibrations[sc.target_prevalence_00], truths[sc.xi], progress))
    return reports


def run_simulate(cfg) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = run_studies(cfg)
    facets = []
    relbias, coverage, ese, boxplot = [], [], [], []
    for rep in reports:
        sc = rep.config
        key = [sc.dgp, sc.target_prevalence_00, sc.xi]
        facets.append({
            "dgp": sc.dgp, "prevalence_00": sc.target_prevalence_00, "xi": sc.xi,
            "n": sc.n, "runs": sc.runs, "bootstrap_R": sc.bootstrap_R,
            "models": {s.label: s.formula for s in sc.model_set},
            "balance_covariates": list(sc.balance_covariates),
            "calibration": {"parameter": rep.calibration.parameter,
                            "achieved_prevalence": rep.calibration.achieved_prevalence,
                            "mc_size": rep.calibration.mc_size},
            "oracle_true_ddi": rep.oracle_true_ddi,
            "estimators": [{
                "estimator": s.name, "mean_relative_bias": s.mean_relative_bias,
                "coverage": s.coverage, "empirical_se": s.empirical_se,
                "mean_bootstrap_se": s.mean_bootstrap_se,
                "failures": s.failures, "successes": s.successes,
            } for s in rep.estimators.values()],
            "estimates": {k: v for k, v in rep.thetas.items()},
        })
        for s in rep.estimators.values():
            relbias.append([s.name] + key + [s.mean_relative_bias])
            coverage.append([s.name] + key + [s.coverage])
            ese.append([s.name] + key + [s.empirical_se])
        for which, per in rep.balance.items():
            for cov, vals in per.items():
                for run, v in enumerate(vals):
                    boxplot.append(key + [run, cov, which, v])
    write_json(out / "study.json", {"command": "simulate", "seed": cfg.seed, "facets": facets})
    head = ["estimator", "dgp", "prevalence_00", "xi"]
    write_csv(out / "relbias.csv", head + ["mean_relative_bias"], relbias)
    write_csv(out / "coverage.csv", head + ["coverage"], coverage)
    write_csv(out / "ese.csv", head + ["empirical_se"], ese)
    write_csv(out / "balance_boxplot.csv",
              ["dgp", "prevalence_00", "xi", "run", "covariate", "weighting", "psb_overall"], boxplot)
    return 0


COMMANDS = {"estimate": run_estimate, "diagnose": run_diagnose, "simulate": run_simulate}


def _write_error(out_dir, exc):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "error.json", {"error": {
        "type": type(exc).__name__,
        "module": getattr(exc, "module", "mrddi"),
        "message": str(exc),
    }})


def build_parser():
    parser = argparse.ArgumentParser(prog="mrddi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML or JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = args.output_dir or "output"
    try:
        cfg = load_config(args.config, args.command, seed=args.seed, threads=args.threads,
                          output_dir=args.output_dir)
        out_dir = cfg.output_dir
        return COMMANDS[cfg.command](cfg)
    except (MrddiError, ValueError, KeyError) as exc:
        _write_error(out_dir, exc)
        print(f"mrddi {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
