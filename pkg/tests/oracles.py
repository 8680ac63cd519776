"""Brute-force reference solvers, written independently of the package."""

import numpy as np
from scipy.optimize import linprog


def dual_bisection(g, tol=1e-14, max_iter=400):
    """Root of sum g/(1 + rho g) for a single column, or None if none exists."""
    g = np.asarray(g, dtype=float).ravel()
    if not (g.max() > 0 and g.min() < 0):
        return None
    lo, hi = -1.0 / g.max(), -1.0 / g.min()
    psi = lambda r: np.sum(g / (1.0 + r * g))  # decreasing on (lo, hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if psi(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _feasible_box(G):
    """Coordinate bounds of {rho : 1 + G rho >= 0}, or None if unbounded."""
    K = G.shape[1]
    lo, hi = np.empty(K), np.empty(K)
    for k in range(K):
        for sign, store in ((1.0, lo), (-1.0, hi)):
            c = np.zeros(K)
            c[k] = sign
            res = linprog(c, A_ub=-G, b_ub=np.ones(G.shape[0]), bounds=[(None, None)] * K,
                          method="highs")
            if res.status != 0:
                return None
            store[k] = res.x[k]
    return lo, hi


def dual_grid(G, points=21, tol=1e-11, max_rounds=2000):
    """Minimize -sum log(1 + G rho) by repeated dense grid refinement.

    The grid recentres on the best point each round and only shrinks when
    that point is interior, so a minimizer outside the window is chased
    rather than lost. Returns None if the feasible set is unbounded or the
    refinement does not settle.
    """
    G = np.asarray(G, dtype=float)
    K = G.shape[1]
    box = _feasible_box(G)
    if box is None:
        return None
    lo, hi = box
    centre = np.zeros(K)  # always feasible
    half = np.maximum(np.abs(lo), np.abs(hi))
    axes = np.linspace(-1.0, 1.0, points)
    offsets = np.stack(np.meshgrid(*([axes] * K), indexing="ij"), axis=-1).reshape(-1, K)
    edge = np.any(np.abs(offsets) == 1.0, axis=1)
    for _ in range(max_rounds):
        # objective relative to the centre, via log1p, to avoid cancellation
        h = G / (1.0 + G @ centre)[:, None]
        u = (offsets * half) @ h.T
        with np.errstate(invalid="ignore"):
            f = np.where(np.all(u > -1.0, axis=1), -np.sum(np.log1p(np.where(u > -1.0, u, 0.0)), axis=1), np.inf)
        best = int(np.argmin(f))
        if not np.isfinite(f[best]):
            return None
        centre = centre + offsets[best] * half
        if not edge[best]:
            half = half * 4.0 / (points - 1)
            if np.all(half < tol * np.maximum(1.0, np.abs(centre))):
                return centre
    return None


def random_dual_problem(g):
    """K in {1,2,3}, m in [K+1, 12]; columns shifted so some problems are infeasible."""
    K = int(g.integers(1, 4))
    m = int(g.integers(K + 1, 13))
    Z = g.standard_normal((m, K)) * g.uniform(0.05, 2.0, K)
    shift = g.uniform(0.0, 1.3)
    return Z - shift * Z.mean(axis=0)
