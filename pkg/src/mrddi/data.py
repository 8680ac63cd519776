"""Observed-sample data model and treatment-arm bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyArm


class Arm(NamedTuple):
    a: int
    b: int

    def __str__(self):
        return f"({self.a},{self.b})"

    @property
    def label(self):
        return f"{self.a}{self.b}"


# Column order used for every n x 4 probability matrix.
ARMS = (Arm(1, 1), Arm(0, 1), Arm(1, 0), Arm(0, 0))
REFERENCE_ARM = Arm(0, 0)


def arm_index(arm) -> int:
    return ARMS.index(Arm(*arm))


@dataclass(frozen=True)
class Dataset:
    outcome: np.ndarray
    treat_a: np.ndarray
    treat_b: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple

    def __post_init__(self):
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        object.__setattr__(self, "outcome", _frozen(self.outcome, float))
        object.__setattr__(self, "treat_a", _frozen(self.treat_a, float))
        object.__setattr__(self, "treat_b", _frozen(self.treat_b, float))
        object.__setattr__(self, "covariates", _frozen(cov, float))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        n = self.outcome.shape[0]
        if n < 1:
            raise ValueError("dataset needs at least one row")
        for name in ("treat_a", "treat_b"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} has length {getattr(self, name).shape[0]}, expected {n}")
        if self.covariates.shape[0] != n:
            raise ValueError(f"covariates have {self.covariates.shape[0]} rows, expected {n}")
        p = self.covariates.shape[1]
        if p < 1:
            raise ValueError("at least one covariate is required")
        if len(self.covariate_names) != p:
            raise ValueError("covariate_names does not match the number of covariate columns")
        if len(set(self.covariate_names)) != p or any(not str(s) for s in self.covariate_names):
            raise ValueError("covariate names must be unique and nonempty")

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def column(self, name) -> np.ndarray:
        try:
            return self.covariates[:, self.covariate_names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def take(self, idx) -> "Dataset":
        """Row subset (or bootstrap resample) in the order of ``idx``."""
        idx = np.asarray(idx)
        return Dataset(
            self.outcome[idx],
            self.treat_a[idx],
            self.treat_b[idx],
            self.covariates[idx],
            self.covariate_names,
        )

    def arm_mask(self, arm) -> np.ndarray:
        a, b = arm
        return (self.treat_a == a) & (self.treat_b == b)


def _frozen(x, dtype):
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Violation:
    category: str  # "fatal" or "warning"
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = field(default_factory=tuple)

    @property
    def fatal(self):
        return [v for v in self.violations if v.category == "fatal"]

    @property
    def warnings(self):
        return [v for v in self.violations if v.category == "warning"]

    @property
    def ok(self) -> bool:
        return not self.fatal


def validate_dataset(d: Dataset) -> ValidationReport:
    out = []
    for name in ("treat_a", "treat_b"):
        v = getattr(d, name)
        bad = ~np.isin(v, (0.0, 1.0)) & ~np.isnan(v)
        if bad.any():
            out.append(Violation("fatal", "non-binary treatment",
                                 f"{name} has {int(bad.sum())} value(s) outside {{0,1}}"))
    for name, v in (("outcome", d.outcome), ("treat_a", d.treat_a), ("treat_b", d.treat_b)):
        if not np.isfinite(v).all():
            out.append(Violation("fatal", "missing value",
                                 f"{name} has {int((~np.isfinite(v)).sum())} missing/non-finite value(s)"))
    finite_cov = np.isfinite(d.covariates)
    for j, name in enumerate(d.covariate_names):
        col = d.covariates[:, j]
        if not finite_cov[:, j].all():
            out.append(Violation("fatal", "missing value",
                                 f"covariate {name} has {int((~finite_cov[:, j]).sum())} missing/non-finite value(s)"))
        elif d.n > 1 and np.ptp(col) == 0:
            out.append(Violation("warning", "constant covariate", f"covariate {name} is constant"))
    for arm in ARMS:
        if not d.arm_mask(arm).any():
            out.append(Violation("fatal", "empty arm", f"no rows with (A,B)={arm}"))
    return ValidationReport(tuple(out))


@dataclass(frozen=True)
class ArmPartition:
    n: int
    indices: dict  # Arm -> sorted int array

    def __getitem__(self, arm) -> np.ndarray:
        return self.indices[Arm(*arm)]

    def size(self, arm) -> int:
        return len(self[arm])


def arm_partition(d: Dataset) -> ArmPartition:
    groups = {}
    for arm in ARMS:
        idx = np.flatnonzero(d.arm_mask(arm))
        idx.setflags(write=False)
        groups[arm] = idx
    empty = [arm for arm in ARMS if len(groups[arm]) == 0]
    if empty:
        raise EmptyArm(empty)
    return ArmPartition(d.n, groups)


def make_dataset(outcome, treat_a, treat_b, covariates: Sequence | np.ndarray, names=None) -> Dataset:
    cov = np.asarray(covariates, dtype=float)
    if cov.ndim == 1:
        cov = cov[:, None]
    if names is None:
        names = [f"X{j + 1}" for j in range(cov.shape[1])]
    return Dataset(outcome, treat_a, treat_b, cov, tuple(names))
