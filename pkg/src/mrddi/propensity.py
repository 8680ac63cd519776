"""Candidate propensity-score models for the four-level composite treatment.

Two parametrizations are supported: a multinomial logistic model with one
coefficient vector per non-reference arm, and a factored form that multiplies
a binary logistic model for ``A | X`` with one for ``B | A, X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import expit, log_expit

from .data import ARMS, REFERENCE_ARM, Arm, arm_index
from .errors import EmptyArm, NonConvergence, SeparationError
from .formula import build_design_matrix, format_formula, parse_formula

MULTINOMIAL = "multinomial"
FACTORED = "factored-binary"

SCORE_TOL = 1e-8
MAX_ITER = 100
MAX_HALVINGS = 30
RIDGE = 1e-6
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class PropensityModelSpec:
    label: str
    terms: tuple = ()
    family: str = MULTINOMIAL

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.family not in (MULTINOMIAL, FACTORED):
            raise ValueError(f"unknown family {self.family!r}")

    @classmethod
    def from_formula(cls, label, text, names=None, family=MULTINOMIAL):
        return cls(label, tuple(parse_formula(text, names)), family)

    @property
    def formula(self) -> str:
        return format_formula(self.terms)


@dataclass(frozen=True, eq=False)
class FittedPropensity:
    spec: PropensityModelSpec
    coefficients: dict  # arm -> vector (multinomial) or "A"/"B" -> vector (factored)
    probs: np.ndarray  # n x 4, columns in ARMS order, clipped to [1e-12, 1 - 1e-12]
    converged: bool
    iterations: int
    loglik: float
    covariance: Optional[np.ndarray] = None
    n_clipped: int = 0
    reference: Arm = REFERENCE_ARM
    loglik_trace: tuple = field(default=(), repr=False)

    @property
    def label(self):
        return self.spec.label

    @property
    def stacked_coefficients(self) -> np.ndarray:
        return np.concatenate([np.asarray(v) for v in self.coefficients.values()])

    def clipped_in(self, rows, arm) -> int:
        """How many of ``rows`` had their ``arm`` probability clipped."""
        col = self.probs[rows, arm_index(arm)]
        return int(np.sum((col <= PROB_FLOOR) | (col >= 1 - PROB_FLOOR)))


def _newton(objective, x0, max_iter=MAX_ITER):
    """Maximize a concave log-likelihood by Newton steps with step halving.

    ``objective(x)`` returns ``(loglik, score, information)``. Returns the
    final iterate, its objective triple, the convergence flag, the iteration
    count and the log-likelihood trace.
    """
    x = x0.copy()
    ll, score, info = objective(x)
    trace = [ll]
    for it in range(max_iter + 1):
        if np.max(np.abs(score)) < SCORE_TOL:
            return x, (ll, score, info), True, it, trace
        if it == max_iter:
            break
        step = _newton_step(info, score)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            x_new = x + t * step
            ll_new, score_new, info_new = objective(x_new)
            # near the optimum the log-likelihood change drowns in rounding
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * max(1.0, abs(ll)):
                break
            t *= 0.5
        else:
            # no ascent possible at machine precision
            return x, (ll, score, info), False, it, trace
        x, ll, score, info = x_new, ll_new, score_new, info_new
        trace.append(ll)
    return x, (ll, score, info), False, max_iter, trace


def _newton_step(info, score):
    try:
        c = linalg.cho_factor(info, check_finite=True)
        return linalg.cho_solve(c, score)
    except (linalg.LinAlgError, ValueError):
        pass
    try:
        c = linalg.cho_factor(info + RIDGE * np.eye(len(score)))
        return linalg.cho_solve(c, score)
    except (linalg.LinAlgError, ValueError):
        raise SeparationError("information matrix is singular even with ridge fallback") from None


def _covariance(info):
    try:
        return linalg.inv(info)
    except (linalg.LinAlgError, ValueError):
        return None


def _softmax_with_reference(eta):
    """Probabilities for K linear predictors plus a reference category with predictor 0."""
    m = np.maximum(eta.max(axis=1), 0.0)
    ex = np.exp(eta - m[:, None])
    ref = np.exp(-m)
    denom = ref + ex.sum(axis=1)
    return ex / denom[:, None], ref / denom, m + np.log(denom)


def _check_complete_separation(observed, fitted, what):
    if np.max(np.abs(observed - fitted)) < 1e-6:
        raise SeparationError(f"{what}: fitted probabilities are numerically 0 or 1 for every row")


def _clip(probs):
    clipped = (probs < PROB_FLOOR) | (probs > 1 - PROB_FLOOR)
    return np.clip(probs, PROB_FLOOR, 1 - PROB_FLOOR), int(clipped.sum())


def fit_multinomial_logistic(d, spec: PropensityModelSpec, reference=REFERENCE_ARM) -> FittedPropensity:
    """Maximum-likelihood multinomial logistic fit by Newton-Raphson.

    Starts at zero; raises :class:`NonConvergence` if the score does not fall
    below 1e-8 (max-abs) within 100 iterations.
    """
    reference = Arm(*reference)
    empty = [arm for arm in ARMS if not d.arm_mask(arm).any()]
    if empty:
        raise EmptyArm(empty)
    X = build_design_matrix(d, spec.terms)
    n, q = X.shape
    others = [arm for arm in ARMS if arm != reference]
    T = np.column_stack([d.arm_mask(arm) for arm in others]).astype(float)
    K = len(others)

    # row-wise outer products, reused for every information block
    outer = (X[:, :, None] * X[:, None, :]).reshape(n, q * q)
    pairs = [(k, l) for k in range(K) for l in range(k, K)]

    def objective(beta):
        B = beta.reshape(K, q)
        eta = X @ B.T
        P, _, lse = _softmax_with_reference(eta)
        ll = float(np.sum(T * eta) - np.sum(lse))
        score = (X.T @ (T - P)).T.ravel()
        W = np.stack([P[:, k] * ((k == l) - P[:, l]) for k, l in pairs])
        blocks = (W @ outer).reshape(len(pairs), q, q)
        info = np.empty((K * q, K * q))
        for (k, l), blk in zip(pairs, blocks):
            info[k * q:(k + 1) * q, l * q:(l + 1) * q] = blk
            info[l * q:(l + 1) * q, k * q:(k + 1) * q] = blk.T
        return ll, score, info

    beta, (ll, score, info), converged, iters, trace = _newton(objective, np.zeros(K * q))
    B = beta.reshape(K, q)
    P, p_ref, _ = _softmax_with_reference(X @ B.T)
    probs = np.empty((n, 4))
    for k, arm in enumerate(others):
        probs[:, arm_index(arm)] = P[:, k]
    probs[:, arm_index(reference)] = p_ref
    observed = np.column_stack([d.arm_mask(arm) for arm in ARMS]).astype(float)
    _check_complete_separation(observed, probs, f"model {spec.label!r}")
    if not converged:
        raise NonConvergence(
            f"model {spec.label!r}: max-abs score {np.max(np.abs(score)):.3g} after {iters} iterations")
    probs, n_clipped = _clip(probs)
    return FittedPropensity(
        spec=spec,
        coefficients={arm: B[k].copy() for k, arm in enumerate(others)},
        probs=probs,
        converged=True,
        iterations=iters,
        loglik=ll,
        covariance=_covariance(info),
        n_clipped=n_clipped,
        reference=reference,
        loglik_trace=tuple(trace),
    )


def fit_binary_logistic(X, y, what="binary model"):
    """Binary logistic regression by Newton (IRLS). Returns (beta, info, iterations, trace)."""

    def objective(beta):
        eta = X @ beta
        p = expit(eta)
        ll = float(np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta)))
        score = X.T @ (y - p)
        info = X.T @ ((p * (1 - p))[:, None] * X)
        return ll, score, info

    beta, (ll, score, info), converged, iters, trace = _newton(objective, np.zeros(X.shape[1]))
    _check_complete_separation(y, expit(X @ beta), what)
    if not converged:
        raise NonConvergence(f"{what}: max-abs score {np.max(np.abs(score)):.3g} after {iters} iterations")
    return beta, info, iters, trace


def fit_factored_binary(d, spec: PropensityModelSpec) -> FittedPropensity:
    """P(A=a, B=b | X) as P(A=a | X) * P(B=b | A=a, X), two logistic fits."""
    X = build_design_matrix(d, spec.terms)
    n = X.shape[0]
    XB = np.column_stack([X, d.treat_a])
    beta_a, info_a, it_a, tr_a = fit_binary_logistic(X, d.treat_a, f"model {spec.label!r} (A)")
    beta_b, info_b, it_b, tr_b = fit_binary_logistic(XB, d.treat_b, f"model {spec.label!r} (B|A)")
    pa1 = expit(X @ beta_a)
    pb1_a1 = expit(X @ beta_b[:-1] + beta_b[-1])
    pb1_a0 = expit(X @ beta_b[:-1])
    probs = np.empty((n, 4))
    probs[:, arm_index((1, 1))] = pa1 * pb1_a1
    probs[:, arm_index((1, 0))] = pa1 * (1 - pb1_a1)
    probs[:, arm_index((0, 1))] = (1 - pa1) * pb1_a0
    probs[:, arm_index((0, 0))] = (1 - pa1) * (1 - pb1_a0)
    probs, n_clipped = _clip(probs)
    ll = tr_a[-1] + tr_b[-1]
    return FittedPropensity(
        spec=spec,
        coefficients={"A": beta_a, "B": beta_b},
        probs=probs,
        converged=True,
        iterations=it_a + it_b,
        loglik=ll,
        covariance=linalg.block_diag(_covariance(info_a), _covariance(info_b))
        if _covariance(info_a) is not None and _covariance(info_b) is not None else None,
        n_clipped=n_clipped,
        loglik_trace=tuple(tr_a) + tuple(tr_b),
    )


def fit_propensity(d, spec: PropensityModelSpec) -> FittedPropensity:
    if spec.family == FACTORED:
        return fit_factored_binary(d, spec)
    return fit_multinomial_logistic(d, spec)


def predict_arm_probabilities(f: FittedPropensity, arm) -> np.ndarray:
    return f.probs[:, arm_index(arm)]
