"""Covariate balance across the four treatment arms.

PSB compares an arm's weighted covariate mean with the unweighted pooled mean,
in units of the pooled (n-1) standard deviation. Pairwise SMDs compare two
arms' weighted means against the root of their average unweighted variances.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import ARMS, Arm
from .errors import ConstantCovariate

PSB_CUTOFF = 0.2
SMD_CUTOFF = 0.1

# (1,1)v(1,0), (1,1)v(0,1), (1,1)v(0,0), (1,0)v(0,1), (1,0)v(0,0), (0,1)v(0,0)
PAIR_ORDER = tuple(combinations((Arm(1, 1), Arm(1, 0), Arm(0, 1), Arm(0, 0)), 2))


def pair_label(p, q):
    return f"{p}v{q}"


def _weighted_mean(d, w, k):
    return float(np.dot(w.weights, d.column(k)[w.rows]))


def _pooled_sd(x, k):
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    if sd == 0.0:
        raise ConstantCovariate(f"covariate {k!r} is constant in the pooled sample")
    return sd


def psb_arm_covariate(d, w, k) -> float:
    x = d.column(k)
    return abs(_weighted_mean(d, w, k) - float(x.mean())) / _pooled_sd(x, k)


def psb_by_arm(d, weight_sets, k) -> dict:
    x = d.column(k)
    xbar = float(x.mean())
    sd = _pooled_sd(x, k)
    return {arm: abs(_weighted_mean(d, weight_sets[arm], k) - xbar) / sd for arm in ARMS}


def psb_overall(d, weight_sets, k) -> float:
    return max(psb_by_arm(d, weight_sets, k).values())


def _arm_var(x):
    return float(np.var(x, ddof=1)) if x.size > 1 else 0.0


def pairwise_smd(d, weight_sets, k) -> dict:
    """Six absolute standardized mean differences keyed by pair label."""
    x = d.column(k)
    out = {}
    for p, q in PAIR_ORDER:
        wp, wq = weight_sets[p], weight_sets[q]
        denom = np.sqrt(0.5 * (_arm_var(x[wp.rows]) + _arm_var(x[wq.rows])))
        if denom == 0:
            raise ConstantCovariate(f"covariate {k!r} is constant within arms {p} and {q}")
        out[pair_label(p, q)] = abs(_weighted_mean(d, wp, k) - _weighted_mean(d, wq, k)) / denom
    return out


@dataclass(frozen=True)
class CovariateBalance:
    covariate: str
    psb_by_arm: dict
    psb_overall: float
    pairwise_smd: dict

    @property
    def flag_02(self) -> bool:
        return self.psb_overall > PSB_CUTOFF

    @property
    def flag_01_pairwise(self) -> bool:
        return any(v > SMD_CUTOFF for v in self.pairwise_smd.values())


@dataclass(frozen=True)
class BalanceReport:
    weighting: str
    covariates: tuple  # CovariateBalance, in dataset column order

    @property
    def n_over_psb_cutoff(self) -> int:
        return sum(c.flag_02 for c in self.covariates)

    @property
    def n_over_smd_cutoff(self) -> int:
        return sum(c.flag_01_pairwise for c in self.covariates)

    def __getitem__(self, name) -> CovariateBalance:
        for c in self.covariates:
            if c.covariate == name:
                return c
        raise KeyError(name)


def balance_report(d, weight_sets, weighting, covariates=None) -> BalanceReport:
    """Balance of every non-constant covariate; constant ones are skipped."""
    names = d.covariate_names if covariates is None else covariates
    rows = []
    for k in names:
        try:
            by_arm = psb_by_arm(d, weight_sets, k)
            smd = pairwise_smd(d, weight_sets, k)
        except ConstantCovariate:
            continue
        rows.append(CovariateBalance(k, by_arm, max(by_arm.values()), smd))
    return BalanceReport(weighting, tuple(rows))
