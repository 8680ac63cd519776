"""Per-arm weights: IPTW, empirical likelihood, and EL with covariate balancing.

The two empirical-likelihood schemes solve, arm by arm, the convex dual

    min_rho  -(1/m) * sum_i log(1 + rho' g_i)

over the open set where every ``1 + rho' g_i`` is positive. ``g_i`` holds
the centered fitted propensities of each candidate model (and, for the
balancing variant, centered covariates). The weights are then proportional
to ``1 / (1 + rho' g_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .data import Arm, arm_index
from .errors import AllColumnsDropped, DualNonConvergence

IPTW = "IPTW"
EL = "EL"
MELCB = "mELCB"

DUAL_TOL = 1e-8
DUAL_MAX_ITER = 200
MASS_TOL = 1e-8
INTERIOR_MARGIN = 1e-10
ARMIJO = 1e-4
COLLINEAR_TOL = 1e-8
ZERO_COLUMN_TOL = 1e-12
DEGENERATE_SHARE = 0.05


@dataclass(frozen=True, eq=False)
class WeightSet:
    arm: Arm
    rows: np.ndarray  # dataset row indices of the arm members, ascending
    weights: np.ndarray
    method: str
    provenance: tuple  # model labels, then balanced covariates
    degenerate: bool = False  # IPTW only: too many clipped probabilities
    dual: "DualSolution | None" = None


@dataclass(frozen=True, eq=False)
class ConstraintMatrix:
    arm: Arm
    rows: np.ndarray  # m x K, arm members only
    column_labels: tuple
    centers: np.ndarray
    dropped_columns: tuple = ()

    @property
    def shape(self):
        return self.rows.shape


@dataclass(frozen=True)
class DualSolution:
    rho: np.ndarray
    converged: bool
    grad_norm: float  # max-abs of sum_i g_i / (1 + rho' g_i)
    iterations: int
    dropped_columns: tuple = ()
    objective_trace: tuple = ()


def iptw_weights(fit, part, arm) -> WeightSet:
    """Hajek-normalized inverse propensity weights for the members of ``arm``."""
    arm = Arm(*arm)
    rows = part[arm]
    p = fit.probs[rows, arm_index(arm)]
    inv = 1.0 / p
    w = inv / inv.sum()
    degenerate = fit.clipped_in(rows, arm) > DEGENERATE_SHARE * len(rows)
    return WeightSet(arm, rows, w, IPTW, (fit.label,), degenerate)


def _filter_columns(G, labels):
    """Keep columns in specification order unless they are (near) linear
    combinations of earlier ones. Returns kept indices and dropped labels.

    With an unpivoted QR, |R[j, j]| is the norm of column j after projecting
    out every earlier column, so one factorization serves all columns.
    """
    nonzero = np.max(np.abs(G), axis=0, initial=0.0) > ZERO_COLUMN_TOL
    r = linalg.qr(G[:, nonzero], mode="r")[0] if nonzero.any() else np.zeros((0, 0))
    pivots = np.zeros(G.shape[1])
    diag = np.abs(np.diag(r))
    pivots[np.flatnonzero(nonzero)[:diag.size]] = diag
    keep, dropped = [], []
    lead = None
    for j in range(G.shape[1]):
        if not nonzero[j]:
            dropped.append(labels[j])
            continue
        if lead is None:
            lead = pivots[j]
        if pivots[j] < COLLINEAR_TOL * lead:
            dropped.append(labels[j])
            continue
        keep.append(j)
    return keep, tuple(dropped)


def build_constraint_matrix(fits, d, part, arm, balance_covariates=()) -> ConstraintMatrix:
    arm = Arm(*arm)
    rows = part[arm]
    k = arm_index(arm)
    cols, labels, centers = [], [], []
    for f in fits:
        e = f.probs[:, k]
        mu = e.mean()
        cols.append(e[rows] - mu)
        labels.append(f.label)
        centers.append(mu)
    for name in balance_covariates:
        x = d.column(name)
        xbar = x.mean()
        cols.append(x[rows] - xbar)
        labels.append(name)
        centers.append(xbar)
    if not cols:
        raise AllColumnsDropped("no constraint columns were requested")
    G = np.column_stack(cols)
    keep, dropped = _filter_columns(G, labels)
    if not keep:
        raise AllColumnsDropped(f"arm {arm}: every constraint column is degenerate ({', '.join(dropped)})")
    return ConstraintMatrix(
        arm=arm,
        rows=G[:, keep],
        column_labels=tuple(labels[j] for j in keep),
        centers=np.asarray(centers)[keep],
        dropped_columns=dropped,
    )


def solve_dual(G, max_iter=DUAL_MAX_ITER) -> DualSolution:
    """Damped Newton on the EL dual, started at zero and kept strictly feasible.

    ``G`` is a :class:`ConstraintMatrix` or an m x K array.
    """
    dropped = ()
    if isinstance(G, ConstraintMatrix):
        dropped = G.dropped_columns
        G = G.rows
    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    m, K = G.shape
    rho = np.zeros(K)
    denom = np.ones(m)
    obj = 0.0
    trace = [obj]
    for it in range(max_iter + 1):
        r = G / denom[:, None]
        resid = r.sum(axis=0)
        gnorm = float(np.max(np.abs(resid)))
        # masses 1/(m(1 + rho'g)) must also sum to 1; a vanishing residual
        # alone is reached as |rho| -> inf when 0 is outside the hull of g
        mass_gap = abs(float(rho @ resid)) / m
        if gnorm < DUAL_TOL and mass_gap < MASS_TOL:
            rho, gnorm = _polish(G, rho, r, resid, gnorm)
            return DualSolution(rho, True, gnorm, it, dropped, tuple(trace))
        if it == max_iter:
            break
        grad = -resid / m
        hess = (r.T @ r) / m
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        slope = grad @ step
        if slope >= 0:
            step = -grad
            slope = grad @ step
        t = 1.0
        Gs = G @ step
        accepted = False
        for _ in range(60):
            new_denom = denom + t * Gs
            if np.all(new_denom >= INTERIOR_MARGIN):
                new_obj = -np.mean(np.log(new_denom))
                if new_obj <= obj + ARMIJO * t * slope:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        rho = rho + t * step
        denom = 1.0 + G @ rho
        obj = -np.mean(np.log(denom))
        trace.append(obj)
    raise DualNonConvergence(
        f"dual residual {gnorm:.3g} (mass gap {mass_gap:.3g}) not below {DUAL_TOL:g} "
        f"after {it} iterations; is 0 inside the convex hull of the constraint rows?")


def _polish(G, rho, r, resid, gnorm):
    """One undamped Newton step past the stopping rule; kept only if it
    stays interior and does not worsen the residual."""
    try:
        cand = rho + np.linalg.solve(r.T @ r, resid)
    except np.linalg.LinAlgError:
        return rho, gnorm
    denom = 1.0 + G @ cand
    if np.any(denom < INTERIOR_MARGIN):
        return rho, gnorm
    cand_norm = float(np.max(np.abs((G / denom[:, None]).sum(axis=0))))
    return (cand, cand_norm) if cand_norm <= gnorm else (rho, gnorm)


def _el_from_matrix(C, arm, rows, method, provenance):
    sol = solve_dual(C)
    inv = 1.0 / (1.0 + C.rows @ sol.rho)
    return WeightSet(arm, rows, inv / inv.sum(), method, provenance, dual=sol)


def el_weights(fits, d, part, arm) -> WeightSet:
    arm = Arm(*arm)
    rows = part[arm]
    labels = tuple(f.label for f in fits)
    try:
        C = build_constraint_matrix(fits, d, part, arm)
    except AllColumnsDropped:
        m = len(rows)
        return WeightSet(arm, rows, np.full(m, 1.0 / m), EL, labels)
    return _el_from_matrix(C, arm, rows, EL, labels)


def melcb_weights(fits, d, part, arm, balance_covariates) -> WeightSet:
    if not balance_covariates:
        raise ValueError("covariate-balancing EL needs at least one balance covariate")
    arm = Arm(*arm)
    rows = part[arm]
    C = build_constraint_matrix(fits, d, part, arm, balance_covariates)
    return _el_from_matrix(C, arm, rows, MELCB, tuple(f.label for f in fits) + tuple(balance_covariates))


def constraint_residual(ws: WeightSet, C: ConstraintMatrix) -> float:
    return float(np.max(np.abs(ws.weights @ C.rows)))
