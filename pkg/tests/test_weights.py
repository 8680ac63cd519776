import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrddi.data import ARMS, arm_index, arm_partition, make_dataset
from mrddi.errors import AllColumnsDropped, DualNonConvergence
from mrddi.propensity import FittedPropensity, PropensityModelSpec, fit_multinomial_logistic
from mrddi.simulation import CORRECT_SET, COVARIATE_NAMES, model_specs
from mrddi.weights import (build_constraint_matrix, constraint_residual, el_weights, iptw_weights,
                           melcb_weights, solve_dual)

from oracles import dual_bisection, dual_grid


def fake_fit(probs, label="M"):
    probs = np.asarray(probs, dtype=float)
    return FittedPropensity(PropensityModelSpec(label), {}, probs, True, 0, 0.0)


def two_in_11():
    # rows 0,1 in arm (1,1), then one row in each other arm
    d = make_dataset(np.zeros(5), [1, 1, 1, 0, 0], [1, 1, 0, 1, 0], [[1.0], [2.0], [3.0], [4.0], [5.0]])
    return d, arm_partition(d)


def test_iptw_two_member_arm():
    d, part = two_in_11()
    P = np.full((5, 4), 0.25)
    P[0, 0], P[1, 0] = 0.2, 0.4
    w = iptw_weights(fake_fit(P), part, (1, 1))
    np.testing.assert_allclose(w.weights, [2 / 3, 1 / 3])


def test_iptw_constant_probability_gives_uniform_weights(dgp_a_2000):
    part = arm_partition(dgp_a_2000)
    w = iptw_weights(fake_fit(np.full((2000, 4), 0.25)), part, (0, 1))
    np.testing.assert_allclose(w.weights, 1 / part.size((0, 1)))


def test_iptw_flags_heavy_clipping():
    d, part = two_in_11()
    P = np.full((5, 4), 0.25)
    P[0, 0] = 1e-12
    assert iptw_weights(fake_fit(P), part, (1, 1)).degenerate


def test_dual_symmetric_pair_is_zero():
    for c in (0.01, 1.0, 7.5):
        assert solve_dual(np.array([c, -c])).rho == pytest.approx([0.0], abs=1e-12)


def test_dual_two_point_problem():
    assert solve_dual(np.array([0.2, -0.1])).rho[0] == pytest.approx(2.5, abs=1e-10)
    assert dual_bisection([0.2, -0.1]) == pytest.approx(2.5, abs=1e-12)


def test_dual_four_point_problem_matches_bisection():
    g = np.array([0.3, 0.1, -0.2, -0.15])
    rho = solve_dual(g).rho[0]
    assert rho == pytest.approx(dual_bisection(g), abs=1e-8)
    assert rho == pytest.approx(0.31601889, abs=1e-8)


def test_dual_infeasible_when_zero_outside_hull():
    with pytest.raises(DualNonConvergence):
        solve_dual(np.array([0.2, 0.1, 0.3]))
    with pytest.raises(DualNonConvergence):
        solve_dual(np.array([[1.0, 0.5], [0.5, 1.0], [-0.1, 2.0]]))


def test_dual_objective_trace_decreases():
    g = np.random.default_rng(2).standard_normal((12, 3))
    sol = solve_dual(g - g.mean(axis=0))
    assert np.all(np.diff(sol.objective_trace) <= 1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(4, 12))
def test_dual_matches_grid_oracle_on_centred_problems(seed, K, m):
    g = np.random.default_rng(seed).standard_normal((m, K))
    G = g - g.mean(axis=0)
    if np.linalg.matrix_rank(G) < K:
        return
    oracle = dual_grid(G)
    if oracle is None:
        return
    np.testing.assert_allclose(solve_dual(G).rho, oracle, atol=1e-6)


def test_el_weights_for_two_point_arm():
    d, part = two_in_11()
    P = np.full((5, 4), 0.25)
    # column for arm (1,1): values at rows 0,1 minus the full-sample mean give (0.2, -0.1)
    P[:, 0] = [0.45, 0.15, 0.25, 0.25, 0.15]
    w = el_weights([fake_fit(P)], d, part, (1, 1))
    np.testing.assert_allclose(w.weights, [1 / 3, 2 / 3], atol=1e-10)
    assert np.dot(w.weights, [0.2, -0.1]) == pytest.approx(0.0, abs=1e-12)


def test_model_columns_centre_on_full_sample_mean(dgp_a_2000):
    specs = model_specs(CORRECT_SET)
    fits = [fit_multinomial_logistic(dgp_a_2000, s) for s in specs]
    for arm in ARMS:
        k = arm_index(arm)
        for f in fits:
            assert np.sum(f.probs[:, k] - f.probs[:, k].mean()) == pytest.approx(0.0, abs=1e-10)


def test_intercept_only_model_column_is_dropped(dgp_a_2000):
    part = arm_partition(dgp_a_2000)
    f = fit_multinomial_logistic(dgp_a_2000, PropensityModelSpec("I"))
    with pytest.raises(AllColumnsDropped):
        build_constraint_matrix([f], dgp_a_2000, part, (1, 1))
    w = el_weights([f], dgp_a_2000, part, (1, 1))
    np.testing.assert_allclose(w.weights, 1 / part.size((1, 1)))


def test_balance_column_centres_on_pooled_mean():
    X = np.array([1.0, 2.0, 3.0, 4.0])
    d = make_dataset(np.zeros(6), [1, 1, 1, 0, 0, 0], [1, 1, 0, 1, 0, 0],
                     np.r_[X, 2.5, 2.5][:, None])
    part = arm_partition(d)
    f = fake_fit(np.full((6, 4), 0.25))
    C = build_constraint_matrix([f], d, part, (1, 1), ("X1",))
    assert C.column_labels == ("X1",)
    assert C.dropped_columns == ("M",)
    np.testing.assert_allclose(C.rows[:, 0], [-1.5, -0.5])


def test_balance_only_symmetric_column_gives_uniform_weights():
    d = make_dataset(np.zeros(6), [1, 1, 1, 0, 0, 0], [1, 1, 0, 1, 0, 0],
                     np.array([3.0, 2.0, 2.5, 2.5, 2.5, 2.5])[:, None])
    part = arm_partition(d)
    w = melcb_weights([fake_fit(np.full((6, 4), 0.25))], d, part, (1, 1), ("X1",))
    np.testing.assert_allclose(w.weights, [0.5, 0.5], atol=1e-12)


def test_three_point_balance_column_matches_bisection():
    g = np.array([1.0, -0.5, -0.5])
    rho = dual_bisection(g)
    w = 1 / (1 + rho * g)
    w /= w.sum()
    np.testing.assert_allclose(solve_dual(g).rho, [rho], atol=1e-8)
    assert abs(np.dot(w, g)) < 1e-12
    np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 3], atol=1e-10)


def test_duplicate_model_does_not_change_el_weights(dgp_a_2000):
    part = arm_partition(dgp_a_2000)
    spec = PropensityModelSpec.from_formula("M3", CORRECT_SET["M3"], COVARIATE_NAMES)
    f = fit_multinomial_logistic(dgp_a_2000, spec)
    twin = FittedPropensity(PropensityModelSpec.from_formula("M3b", CORRECT_SET["M3"], COVARIATE_NAMES),
                            f.coefficients, f.probs, True, f.iterations, f.loglik)
    for arm in ARMS:
        one = el_weights([f], dgp_a_2000, part, arm)
        two = el_weights([f, twin], dgp_a_2000, part, arm)
        assert two.dual.dropped_columns == ("M3b",)
        np.testing.assert_allclose(two.weights, one.weights, atol=1e-6)


@pytest.fixture(scope="module")
def correct_fits(dgp_a_2000):
    return [fit_multinomial_logistic(dgp_a_2000, s) for s in model_specs(CORRECT_SET)]


def test_el_and_melcb_residuals_and_balance(dgp_a_2000, correct_fits):
    d = dgp_a_2000
    part = arm_partition(d)
    for arm in ARMS:
        C = build_constraint_matrix(correct_fits, d, part, arm)
        w = el_weights(correct_fits, d, part, arm)
        assert constraint_residual(w, C) < 1e-8
        Cb = build_constraint_matrix(correct_fits, d, part, arm, ("X2", "X3"))
        wb = melcb_weights(correct_fits, d, part, arm, ("X2", "X3"))
        assert constraint_residual(wb, Cb) < 1e-8
        for name in ("X2", "X3"):
            x = d.column(name)
            assert abs(np.dot(wb.weights, x[part[arm]]) - x.mean()) < 1e-8
        assert np.all(wb.weights > 0)
        assert wb.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_melcb_requires_balance_covariates(dgp_a_2000, correct_fits):
    with pytest.raises(ValueError):
        melcb_weights(correct_fits, dgp_a_2000, arm_partition(dgp_a_2000), (1, 1), ())


def test_el_tracks_iptw_under_one_correct_model_with_bounded_propensities():
    # bounded inverse propensities; the heavy-tailed DGP-A version lives in the acceptance suite
    g = np.random.default_rng(21)
    n = 20000
    X = g.uniform(-1, 1, (n, 2))
    eta = np.column_stack([0.3 + 0.6 * X[:, 0], 0.1 - 0.5 * X[:, 1], -0.2 + 0.3 * X[:, 1]])
    P = np.column_stack([np.exp(eta), np.ones(n)])
    P /= P.sum(axis=1, keepdims=True)
    idx = (g.random(n)[:, None] > np.cumsum(P, axis=1)).sum(axis=1)
    arms = np.array(ARMS)[idx]
    d = make_dataset(np.zeros(n), arms[:, 0], arms[:, 1], X)
    part = arm_partition(d)
    f = fit_multinomial_logistic(d, PropensityModelSpec.from_formula("L", "X1 + X2", ["X1", "X2"]))
    for arm in ARMS:
        r = np.corrcoef(el_weights([f], d, part, arm).weights, iptw_weights(f, part, arm).weights)[0, 1]
        assert r > 0.99
