"""Monte-Carlo studies: data-generating processes, calibration, oracle, sweeps.

Two treatment mechanisms are available. ``"A"`` draws the composite
treatment from a multinomial logistic model with an interaction block;
``"B"`` thresholds two antithetically coupled latent normals and is not
multinomial logistic. Both share the covariate law and the logistic outcome
model whose interaction strength is ``xi``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtr

from . import rng as rngmod
from .data import ARMS, arm_partition, make_dataset
from .diagnostics import psb_overall
from .errors import BracketError, EmptyArm, TooManyFailures
from .estimator import EstimationPipeline, bootstrap_many, estimate_many, too_many_failures
from .propensity import PropensityModelSpec
from .weights import WeightSet

COVARIATE_NAMES = ("X1", "X2", "X3", "X4", "X5")

# candidate model sets, keyed by the label used in reports
CORRECT_SET = {
    "M1": "X1 + X2",
    "M2": "X1 + X2 + X3 + X4 + X5",
    "M3": "X1 + X3 + X4",
    "M4": "X1 + X2 + X3 + exp(X4) + exp(X5) + X1:X3 + X2:exp(X4)",
}
ALL_WRONG_SET = {
    "W1": "X1",
    "W2": "X4 + X5",
    "W3": "X1 + X4",
    "W4": "X1 + exp(X4) + exp(X5)",
}
DEFAULT_BALANCE = ("X2", "X3")
PREVALENCES = (0.10, 0.20, 0.30, 0.40, 0.50)
XIS = (0.5, 1.0, 2.0)
CALIBRATION_TOL = 0.002

# (intercept shift, X1, X2, X3, exp(X4), exp(X5), interaction block) per arm
_TREATMENT_COEF = {
    (1, 1): (0.7, 0.4, 0.2, -0.2, -0.4, -0.4, 0.2),
    (0, 1): (0.6, 0.2, 0.6, -0.4, -0.6, -0.2, 0.2),
    (1, 0): (0.5, 0.6, 0.4, -0.2, -0.2, -0.2, 0.4),
}


def model_specs(formulas: dict, family="multinomial"):
    return tuple(PropensityModelSpec.from_formula(k, v, COVARIATE_NAMES, family)
                 for k, v in formulas.items())


def gen_covariates(n, g: np.random.Generator) -> np.ndarray:
    return np.column_stack([
        g.binomial(1, 0.2, n).astype(float),
        g.binomial(1, 0.4, n).astype(float),
        g.standard_normal(n),
        g.uniform(-0.5, 0.5, n),
        g.exponential(1.0, n),
    ])


def treatment_linear_predictors(X, gamma0):
    """n x 3 log-Q values for arms (1,1), (0,1), (1,0)."""
    x1, x2, x3, x4, x5 = X.T
    ex4 = np.exp(x4)
    block = x1 * x3 + x2 * ex4
    basis = np.column_stack([np.ones_like(x1), x1, x2, x3, ex4, np.exp(x5), block])
    coef = np.array([_TREATMENT_COEF[arm] for arm in ((1, 1), (0, 1), (1, 0))])
    return gamma0 + basis @ coef.T


def mnl_arm_probabilities(X, gamma0) -> np.ndarray:
    """n x 4 true arm probabilities (ARMS order) under the multinomial mechanism."""
    lq = treatment_linear_predictors(X, gamma0)
    m = np.maximum(lq.max(axis=1), 0.0)
    ex = np.exp(lq - m[:, None])
    ref = np.exp(-m)
    denom = ref + ex.sum(axis=1)
    return np.column_stack([ex / denom[:, None], ref / denom])


def _arms_to_ab(arm_idx):
    arms = np.array(ARMS)
    return arms[arm_idx, 0].astype(float), arms[arm_idx, 1].astype(float)


def gen_treatment_mnl(X, gamma0, g: np.random.Generator):
    P = mnl_arm_probabilities(X, gamma0)
    u = g.random(X.shape[0])
    cum = np.cumsum(P, axis=1)
    idx = np.minimum((u[:, None] >= cum).sum(axis=1), 3)
    return _arms_to_ab(idx)


def latent_q(X):
    """(Q10, Q01) evaluated with gamma0 = 0."""
    lq = treatment_linear_predictors(X, 0.0)
    return np.exp(lq[:, 2]), np.exp(lq[:, 1])


def gen_treatment_latent(X, c, g: np.random.Generator, return_latent=False):
    q10, q01 = latent_q(X)
    z0 = g.standard_normal(X.shape[0])
    z1 = q10 + z0
    z2 = q01 - z0
    a = (z1 >= c).astype(float)
    b = (z2 >= c).astype(float)
    if return_latent:
        return a, b, z1, z2
    return a, b


def outcome_linear_predictor(X, a, b, xi):
    x1, x2, x3, x4, x5 = X.T
    ex4 = np.exp(x4)
    h = x1 + x2 - x3 + ex4 - np.exp(x5) + x1 * x3 + x2 * ex4
    return 0.5 - 0.1 * a - 0.2 * b - xi * a * b + 0.4 * h * (0.5 + xi * (0.2 * a + 0.1 * b + a * b))


def gen_outcome(X, a, b, xi, g: np.random.Generator) -> np.ndarray:
    p = expit(outcome_linear_predictor(X, a, b, xi))
    return (g.random(X.shape[0]) < p).astype(float)


def prevalence_00(dgp, param, X) -> float:
    """Mean over the covariate draws of P(A=0, B=0 | X) at parameter ``param``."""
    if dgp == "A":
        return float(mnl_arm_probabilities(X, param)[:, 3].mean())
    q10, q01 = latent_q(X)
    # Z1 < c and Z2 < c  <=>  q01 - c < Z0 < c - q10
    return float(np.clip(ndtr(param - q10) - ndtr(q01 - param), 0.0, None).mean())


@dataclass(frozen=True)
class DgpCalibration:
    dgp: str
    target: float
    parameter: float
    achieved_prevalence: float
    mc_size: int


_BRACKETS = {"A": (-15.0, 15.0), "B": (-10.0, 60.0)}


def calibrate_prevalence(dgp, target, mc_size=10**6, seed=0, bracket=None) -> DgpCalibration:
    """Bisection for gamma0 (DGP A) or threshold c (DGP B).

    The prevalence of arm (0,0) is decreasing in gamma0 and increasing in c;
    one fixed covariate sample of size ``mc_size`` is used throughout.
    """
    if not 0 < target < 1:
        raise ValueError("target prevalence must be in (0, 1)")
    X = gen_covariates(mc_size, rngmod.stream(seed, rngmod.CALIBRATION))
    lo, hi = bracket or _BRACKETS[dgp]
    sign = -1.0 if dgp == "A" else 1.0  # make f increasing in the parameter
    f_lo = sign * (prevalence_00(dgp, lo, X) - target)
    f_hi = sign * (prevalence_00(dgp, hi, X) - target)
    if f_lo > 0 or f_hi < 0:
        raise BracketError(f"[{lo}, {hi}] does not bracket prevalence {target} for DGP {dgp}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        achieved = prevalence_00(dgp, mid, X)
        if abs(achieved - target) < 1e-6 or hi - lo < 1e-12:
            break
        if sign * (achieved - target) < 0:
            lo = mid
        else:
            hi = mid
    if abs(achieved - target) >= CALIBRATION_TOL:
        raise BracketError(f"calibration reached only {achieved:.4f} for target {target}")
    return DgpCalibration(dgp, target, mid, achieved, mc_size)


def potential_outcome_means(xi, mc_size=10**7, seed=0, chunk=10**6) -> tuple:
    """E(Y_ab) in ARMS order by averaging the true outcome probability over covariate draws."""
    g = rngmod.stream(seed, rngmod.ORACLE)
    sums = np.zeros(4)
    done = 0
    while done < mc_size:
        k = min(chunk, mc_size - done)
        X = gen_covariates(k, g)
        for j, (a, b) in enumerate(ARMS):
            sums[j] += expit(outcome_linear_predictor(X, a, b, xi)).sum()
        done += k
    return tuple(sums / mc_size)


def oracle_true_ddi(xi, mc_size=10**7, seed=0) -> float:
    m11, m01, m10, m00 = potential_outcome_means(xi, mc_size, seed)
    return (m11 - m01) - (m10 - m00)


def simulate_dataset(n, xi, dgp, param, g: np.random.Generator):
    X = gen_covariates(n, g)
    if dgp == "A":
        a, b = gen_treatment_mnl(X, param, g)
    else:
        a, b = gen_treatment_latent(X, param, g)
    y = gen_outcome(X, a, b, xi, g)
    return make_dataset(y, a, b, X, COVARIATE_NAMES)


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 2000
    xi: float = 1.0
    target_prevalence_00: float = 0.30
    dgp: str = "A"
    runs: int = 250
    bootstrap_R: int = 200
    model_set: tuple = field(default_factory=lambda: model_specs(CORRECT_SET))
    balance_covariates: tuple = DEFAULT_BALANCE
    seed: int = 2024
    calibration_mc: int = 10**6
    oracle_mc: int = 10**7
    workers: int = 1
    max_failure_share: float = 0.10

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not 0 < self.target_prevalence_00 < 1:
            raise ValueError("target_prevalence_00 must be in (0, 1)")
        if self.dgp not in ("A", "B"):
            raise ValueError("dgp must be 'A' or 'B'")
        if self.bootstrap_R != 0 and self.bootstrap_R < 2:
            raise ValueError("bootstrap_R must be 0 (no inference) or at least 2")
        if not 0 <= self.max_failure_share <= 1:
            raise ValueError("max_failure_share must be in [0, 1]")

    def pipelines(self):
        """Per-model IPTW, EL over the whole set, and mELCB when balance covariates are set."""
        specs = tuple(self.model_set)
        out = [EstimationPipeline(specs, "iptw", iptw_model=s.label) for s in specs]
        out.append(EstimationPipeline(specs, "el"))
        if self.balance_covariates:
            out.append(EstimationPipeline(specs, "melcb", balance_covariates=self.balance_covariates))
        return out


@dataclass(frozen=True)
class EstimatorSummary:
    name: str
    mean_relative_bias: float
    coverage: float  # nan when no bootstrap was run
    empirical_se: float
    mean_bootstrap_se: float
    failures: int
    successes: int


@dataclass(frozen=True)
class StudyReport:
    config: SimulationConfig
    calibration: DgpCalibration
    oracle_true_ddi: float
    estimators: dict  # name -> EstimatorSummary
    thetas: dict  # name -> per-run estimates (nan for failed runs)
    covered: dict  # name -> per-run coverage indicator (nan when unavailable)
    bootstrap_se: dict  # name -> per-run bootstrap SE
    balance: dict  # "unweighted"/"mELCB" -> {covariate: per-run overall PSB}

    def summary(self, name) -> EstimatorSummary:
        return self.estimators[name]


def run_one(cfg: SimulationConfig, param: float, truth: float, run: int):
    """One simulated dataset: estimates, coverage flags and balance summaries."""
    pipelines = cfg.pipelines()
    g = rngmod.stream(cfg.seed, run, rngmod.DATA)
    names = [p.name for p in pipelines]
    theta = {k: math.nan for k in names}
    cover = {k: math.nan for k in names}
    se = {k: math.nan for k in names}
    balance = {}
    for _ in range(100):
        d = simulate_dataset(cfg.n, cfg.xi, cfg.dgp, param, g)
        try:
            part = arm_partition(d)
            break
        except EmptyArm:
            continue
    else:
        return theta, cover, se, balance
    full = estimate_many(d, pipelines)
    for k in names:
        if not isinstance(full[k], Exception):
            theta[k] = full[k][0]
    uniform = {arm: _uniform(part, arm) for arm in ARMS}
    balance["unweighted"] = {c: psb_overall(d, uniform, c) for c in cfg.balance_covariates}
    melcb = [p for p in pipelines if p.method == "melcb"]
    if melcb and not isinstance(full[melcb[0].name], Exception):
        ws = full[melcb[0].name][2]
        balance["mELCB"] = {c: psb_overall(d, ws, c) for c in cfg.balance_covariates}
    if cfg.bootstrap_R:
        boots = bootstrap_many(d, pipelines, cfg.bootstrap_R, cfg.seed, key=(run,), full=full)
        for k in names:
            est = boots[k]
            if isinstance(est, Exception) or too_many_failures(est):
                theta[k] = math.nan
                continue
            cover[k] = float(est.covers(truth))
            se[k] = est.se
    return theta, cover, se, balance


def _uniform(part, arm):
    rows = part[arm]
    return WeightSet(arm, rows, np.full(len(rows), 1.0 / len(rows)), "unweighted", ())


def _run_one_star(args):
    return run_one(*args)


def run_study(cfg: SimulationConfig, calibration: DgpCalibration = None, truth: float = None,
              progress=None) -> StudyReport:
    if calibration is None:
        calibration = calibrate_prevalence(cfg.dgp, cfg.target_prevalence_00, cfg.calibration_mc, cfg.seed)
    if truth is None:
        truth = oracle_true_ddi(cfg.xi, cfg.oracle_mc, cfg.seed)
    jobs = [(cfg, calibration.parameter, truth, r) for r in range(cfg.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = []
            for res in ex.map(_run_one_star, jobs, chunksize=1):
                results.append(res)
                if progress:
                    progress(len(results), cfg.runs)
    else:
        results = []
        for job in jobs:
            results.append(run_one(*job))
            if progress:
                progress(len(results), cfg.runs)
    names = [p.name for p in cfg.pipelines()]
    thetas = {k: np.array([r[0][k] for r in results]) for k in names}
    covered = {k: np.array([r[1][k] for r in results]) for k in names}
    ses = {k: np.array([r[2][k] for r in results]) for k in names}
    balance = {}
    for which in ("unweighted", "mELCB"):
        per = {c: np.array([r[3].get(which, {}).get(c, math.nan) for r in results])
               for c in cfg.balance_covariates}
        if per:
            balance[which] = per
    summaries = {}
    for k in names:
        th = thetas[k]
        ok = np.isfinite(th)
        failures = int((~ok).sum())
        if failures > cfg.max_failure_share * cfg.runs:
            raise TooManyFailures(f"{k}: {failures} of {cfg.runs} simulation runs failed")
        good = th[ok]
        cov = covered[k][ok]
        summaries[k] = EstimatorSummary(
            name=k,
            mean_relative_bias=float(np.mean((good - truth) / truth)) if good.size else math.nan,
            coverage=float(np.mean(cov)) if cfg.bootstrap_R and cov.size else math.nan,
            empirical_se=float(np.std(good, ddof=1)) if good.size > 1 else math.nan,
            mean_bootstrap_se=float(np.mean(ses[k][ok])) if cfg.bootstrap_R and good.size else math.nan,
            failures=failures,
            successes=int(ok.sum()),
        )
    return StudyReport(cfg, calibration, truth, summaries, thetas, covered, ses, balance)
