"""DDI point estimates and nonparametric bootstrap inference."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as rngmod
from .data import ARMS, arm_partition
from .errors import (AllColumnsDropped, DomainError, DualNonConvergence, EmptyArm,
                     NonConvergence, SeparationError, TooManyFailures)
from .propensity import fit_propensity
from .weights import EL, IPTW, MELCB, el_weights, iptw_weights, melcb_weights

IDENTITY = "identity"
LOG = "log"
Z_975 = 1.96
MAX_FAILURE_SHARE = 0.10

METHODS = {"iptw": IPTW, "el": EL, "melcb": MELCB}

# failures that mark a bootstrap replicate (or a simulation run) as failed
ESTIMATION_FAILURES = (EmptyArm, NonConvergence, SeparationError, DualNonConvergence,
                       AllColumnsDropped, DomainError)


@dataclass(frozen=True)
class EstimationPipeline:
    """Full recipe for one DDI estimator.

    ``specs`` are the candidate propensity models. IPTW uses the single model
    named by ``iptw_model`` (or the only spec); EL and mELCB use all of them.
    """

    specs: tuple
    method: str = "el"
    link: str = IDENTITY
    balance_covariates: tuple = ()
    iptw_model: Optional[str] = None
    name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "balance_covariates", tuple(self.balance_covariates))
        method = self.method.lower()
        if method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "method", method)
        if self.link not in (IDENTITY, LOG):
            raise ValueError(f"unknown link {self.link!r}")
        labels = [s.label for s in self.specs]
        if len(set(labels)) != len(labels):
            raise ValueError("model labels must be unique")
        if not self.specs:
            raise ValueError("at least one propensity model is required")
        if method == "iptw":
            if self.iptw_model is None:
                if len(self.specs) != 1:
                    raise ValueError("IPTW needs exactly one model; set iptw_model")
                object.__setattr__(self, "iptw_model", self.specs[0].label)
            elif self.iptw_model not in labels:
                raise ValueError(f"iptw_model {self.iptw_model!r} is not among the models")
        if method == "melcb" and not self.balance_covariates:
            raise ValueError("method melcb needs at least one balance covariate")
        if self.name is None:
            object.__setattr__(self, "name", self.default_name())

    def default_name(self):
        if self.method == "iptw":
            return f"IPTW-{self.iptw_model}"
        return METHODS[self.method]

    @property
    def used_specs(self) -> tuple:
        if self.method == "iptw":
            return tuple(s for s in self.specs if s.label == self.iptw_model)
        return self.specs

    @property
    def model_labels(self) -> tuple:
        return tuple(s.label for s in self.used_specs)


@dataclass(frozen=True, eq=False)
class DdiEstimate:
    theta: float
    link: str
    arm_means: tuple  # ARMS order: (1,1), (0,1), (1,0), (0,0)
    se: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    replicates_total: int = 0
    replicates_failed: int = 0
    method: str = ""
    models: tuple = ()
    name: str = ""
    replicate_thetas: np.ndarray = field(default=None, repr=False)

    def covers(self, value) -> bool:
        return self.ci_low is not None and self.ci_low <= value <= self.ci_high


def weighted_arm_mean(d, w) -> float:
    return float(np.dot(w.weights, d.outcome[w.rows]))


def _link(x, link):
    if link == IDENTITY:
        return x
    if x <= 0:
        raise DomainError(f"log link needs positive arm means, got {x!r}")
    return math.log(x)


def ddi_point_estimate(arm_means, link=IDENTITY) -> float:
    """Difference of differences of the linked arm means, given in ARMS order."""
    f11, f01, f10, f00 = (_link(float(m), link) for m in arm_means)
    return (f11 - f01) - (f10 - f00)


def arm_weights(d, part, fits, pipeline):
    """WeightSets for the four arms; ``fits`` maps model label to FittedPropensity."""
    out = {}
    if pipeline.method == "iptw":
        f = fits[pipeline.iptw_model]
        for arm in ARMS:
            out[arm] = iptw_weights(f, part, arm)
        return out
    used = [fits[label] for label in pipeline.model_labels]
    for arm in ARMS:
        if pipeline.method == "el":
            out[arm] = el_weights(used, d, part, arm)
        else:
            out[arm] = melcb_weights(used, d, part, arm, pipeline.balance_covariates)
    return out


def fit_all(d, pipelines):
    """Fit each distinct model once. Failed fits map to the raised exception."""
    fits = {}
    for p in pipelines:
        for s in p.used_specs:
            if s.label in fits:
                continue
            try:
                fits[s.label] = fit_propensity(d, s)
            except ESTIMATION_FAILURES as exc:
                fits[s.label] = exc
    return fits


def estimate_many(d, pipelines, fits=None):
    """Point estimates for several pipelines sharing model fits.

    Returns ``{name: (theta, arm_means, weight_sets)}``, or the exception for
    pipelines that could not be estimated.
    """
    part = arm_partition(d)
    if fits is None:
        fits = fit_all(d, pipelines)
    out = {}
    for p in pipelines:
        bad = [fits[label] for label in p.model_labels if isinstance(fits[label], Exception)]
        if bad:
            out[p.name] = bad[0]
            continue
        try:
            ws = arm_weights(d, part, fits, p)
            means = tuple(weighted_arm_mean(d, ws[arm]) for arm in ARMS)
            out[p.name] = (ddi_point_estimate(means, p.link), means, ws)
        except ESTIMATION_FAILURES as exc:
            out[p.name] = exc
    return out


def point_estimate(d, pipeline) -> DdiEstimate:
    res = estimate_many(d, [pipeline])[pipeline.name]
    if isinstance(res, Exception):
        raise res
    theta, means, _ = res
    return DdiEstimate(theta, pipeline.link, means, method=pipeline.method,
                       models=pipeline.model_labels, name=pipeline.name)


def _replicate(d, pipelines, seed, key, r):
    g = rngmod.stream(seed, *key, rngmod.BOOTSTRAP, r)
    idx = g.integers(0, d.n, size=d.n)
    try:
        res = estimate_many(d.take(idx), pipelines)
    except EmptyArm:
        return [math.nan] * len(pipelines)
    return [res[p.name][0] if not isinstance(res[p.name], Exception) else math.nan
            for p in pipelines]


def bootstrap_many(d, pipelines, R=200, seed=0, threads=1, key=(), full=None):
    """Bootstrap every pipeline on the same R resamples.

    Each replicate resamples rows with replacement, refits all models and
    re-solves all duals. Replicate ``r`` draws from the stream
    ``(seed, *key, BOOTSTRAP, r)``. Returns ``{name: DdiEstimate}``; a
    pipeline whose full-data estimate fails maps to the exception.
    """
    if R < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    pipelines = list(pipelines)
    if full is None:
        full = estimate_many(d, pipelines)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reps = list(ex.map(lambda r: _replicate(d, pipelines, seed, key, r), range(R)))
    else:
        reps = [_replicate(d, pipelines, seed, key, r) for r in range(R)]
    reps = np.asarray(reps, dtype=float).reshape(R, len(pipelines))
    out = {}
    for j, p in enumerate(pipelines):
        res = full[p.name]
        if isinstance(res, Exception):
            out[p.name] = res
            continue
        theta, means, _ = res
        col = reps[:, j]
        ok = col[np.isfinite(col)]
        failed = R - ok.size
        se = float(np.std(ok, ddof=1)) if ok.size >= 2 else math.nan
        out[p.name] = DdiEstimate(
            theta=theta, link=p.link, arm_means=means, se=se,
            ci_low=theta - Z_975 * se, ci_high=theta + Z_975 * se,
            replicates_total=R, replicates_failed=failed,
            method=p.method, models=p.model_labels, name=p.name,
            replicate_thetas=col,
        )
    return out


def too_many_failures(est: DdiEstimate) -> bool:
    return est.replicates_failed > MAX_FAILURE_SHARE * est.replicates_total


def bootstrap_inference(d, pipeline, R=200, seed=0, threads=1) -> DdiEstimate:
    res = bootstrap_many(d, [pipeline], R, seed, threads)[pipeline.name]
    if isinstance(res, Exception):
        raise res
    if too_many_failures(res):
        raise TooManyFailures(
            f"{pipeline.name}: {res.replicates_failed} of {R} bootstrap replicates failed")
    return res

