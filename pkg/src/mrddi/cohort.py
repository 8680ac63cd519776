"""Synthetic stand-in for an EHR drug-pair cohort with 52 baseline covariates.

Covariate names follow the categories used for nested propensity model sets
(key risk factors, possible risk factors, severity surrogates). Only the
schema is realistic; the numbers are made up.
"""

from __future__ import annotations

import csv

import numpy as np
from scipy.special import expit

from .data import ARMS

CONTINUOUS = ("age", "bmi", "egfr", "hemoglobin", "chloride", "platelets", "sodium", "wbc")
KEY_BINARY = ("adm_emergency", "adm_urgent", "icu", "postop", "ckd", "heart_failure", "mi",
              "hypertension", "arrhythmia", "liver_disease", "diabetes", "prior_aki",
              "loop_diuretic", "hctz", "vancomycin", "tmp_smx", "abx_nephrotoxin", "misc_nephrotoxin")
POSSIBLE_BINARY = ("female", "race_black", "race_other", "afib", "valvular", "pulm_circ", "copd",
                   "cancer", "osa")
SURROGATE_BINARY = ("sepsis", "vasopressor", "mech_vent", "contrast", "cardiac_surgery", "transfusion",
                    "anemia", "hypotension", "obesity", "smoker", "dementia", "stroke", "pvd",
                    "hypothyroid", "depression", "alcohol", "coagulopathy")
COVARIATES = CONTINUOUS + KEY_BINARY + POSSIBLE_BINARY + SURROGATE_BINARY

_KEY = ("age", "bmi", "egfr", "hemoglobin", "chloride") + KEY_BINARY
_PS1 = " + ".join(_KEY)
_PS2 = _PS1 + " + " + " + ".join(POSSIBLE_BINARY)
_PS3 = _PS2 + " + platelets + sodium + wbc + " + " + ".join(SURROGATE_BINARY)
_PS4 = _PS3 + " + " + " + ".join(f"adm_emergency:{v}" for v in
                                 ("age", "ckd", "heart_failure", "hemoglobin", "platelets"))
_PS5 = _PS4 + " + " + " + ".join(f"sq({v})" for v in ("bmi", "egfr", "hemoglobin", "chloride"))
NESTED_MODELS = {"PS1": _PS1, "PS2": _PS2, "PS3": _PS3, "PS4": _PS4, "PS5": _PS5}


def synthetic_cohort(n, seed=0):
    """Return ``(columns, names)``: a dict of arrays (id, Y, A, B, covariates) and the covariate names."""
    g = np.random.default_rng(seed)
    cont = {
        "age": g.normal(0.0, 1.0, n),
        "bmi": g.normal(0.0, 1.0, n),
        "egfr": g.normal(0.0, 1.0, n),
        "hemoglobin": g.normal(0.0, 1.0, n),
        "chloride": g.normal(0.0, 1.0, n),
        "platelets": g.normal(0.0, 1.0, n),
        "sodium": g.normal(0.0, 1.0, n),
        "wbc": g.normal(0.0, 1.0, n),
    }
    adm = g.choice(3, size=n, p=[0.5, 0.3, 0.2])
    binary = {"adm_emergency": (adm == 1).astype(float), "adm_urgent": (adm == 2).astype(float)}
    race = g.choice(3, size=n, p=[0.6, 0.25, 0.15])
    for name in KEY_BINARY[2:] + POSSIBLE_BINARY + SURROGATE_BINARY:
        if name == "race_black":
            binary[name] = (race == 1).astype(float)
        elif name == "race_other":
            binary[name] = (race == 2).astype(float)
        else:
            binary[name] = (g.random(n) < g.uniform(0.15, 0.45)).astype(float)
    X = {**cont, **binary}
    lin = {
        (1, 1): 0.4 * X["age"] - 0.5 * X["ckd"] + 0.3 * X["egfr"] - 0.2 * X["adm_emergency"],
        (0, 1): 1.2 + 0.2 * X["age"] + 0.4 * X["hypertension"] - 0.3 * X["ckd"],
        (1, 0): -0.6 + 0.3 * X["bmi"] + 0.3 * X["postop"] - 0.2 * X["heart_failure"],
    }
    eta = np.column_stack([lin[arm] for arm in ARMS[:3]])
    P = np.column_stack([np.exp(eta), np.ones(n)])
    P /= P.sum(axis=1, keepdims=True)
    idx = np.minimum((g.random(n)[:, None] >= np.cumsum(P, axis=1)).sum(axis=1), 3)
    ab = np.array(ARMS)[idx]
    a, b = ab[:, 0].astype(float), ab[:, 1].astype(float)
    risk = (-2.3 + 0.5 * X["age"] + 0.6 * X["ckd"] - 0.4 * X["egfr"] + 0.3 * X["heart_failure"]
            + 0.2 * a + 0.1 * b + 0.05 * a * b)
    y = (g.random(n) < expit(risk)).astype(float)
    cols = {"id": np.arange(1, n + 1), "Y": y, "A": a, "B": b}
    cols.update({k: X[k] for k in COVARIATES})
    return cols, COVARIATES


def write_cohort_csv(path, n, seed=0):
    cols, _ = synthetic_cohort(n, seed)
    keys = list(cols)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for i in range(n):
            w.writerow([int(cols[k][i]) if k == "id" else repr(float(cols[k][i])) for k in keys])
    return path
