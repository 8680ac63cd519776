import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrddi.data import ARMS, arm_index, make_dataset
from mrddi.errors import EmptyArm, SeparationError
from mrddi.propensity import (FACTORED, PropensityModelSpec, fit_factored_binary,
                              fit_multinomial_logistic, fit_propensity)
from mrddi.simulation import CORRECT_SET, COVARIATE_NAMES

from conftest import dgp_a_sample


def spec(text, label="M", family="multinomial", names=COVARIATE_NAMES):
    return PropensityModelSpec.from_formula(label, text, names, family)


def random_arms(n, seed, p=(0.25, 0.25, 0.25, 0.25)):
    g = np.random.default_rng(seed)
    idx = g.choice(4, size=n, p=p)
    idx[:4] = [0, 1, 2, 3]
    arms = np.array(ARMS)[idx]
    return arms[:, 0], arms[:, 1], g


def test_intercept_only_recovers_sample_proportions():
    a, b, g = random_arms(500, 1, (0.1, 0.2, 0.3, 0.4))
    d = make_dataset(np.zeros(500), a, b, g.standard_normal((500, 1)))
    f = fit_multinomial_logistic(d, spec("", names=["X1"]))
    for arm in ARMS:
        np.testing.assert_allclose(f.probs[:, arm_index(arm)], d.arm_mask(arm).mean(), atol=1e-8)


def test_rows_sum_to_one_and_reference_identity(dgp_a_2000):
    f = fit_multinomial_logistic(dgp_a_2000, spec(CORRECT_SET["M2"]))
    np.testing.assert_allclose(f.probs.sum(axis=1), 1.0, atol=1e-10)
    others = f.probs[:, [arm_index(a) for a in ARMS if a != (0, 0)]]
    np.testing.assert_allclose(f.probs[:, arm_index((0, 0))], 1 - others.sum(axis=1), atol=1e-12)


def test_reference_relabeling_leaves_probabilities_unchanged(dgp_a_2000):
    s = spec(CORRECT_SET["M3"])
    base = fit_multinomial_logistic(dgp_a_2000, s)
    for ref in [(1, 1), (0, 1), (1, 0)]:
        other = fit_multinomial_logistic(dgp_a_2000, s, reference=ref)
        np.testing.assert_allclose(other.probs, base.probs, atol=1e-8)


def test_loglik_trace_is_nondecreasing(dgp_a_2000):
    f = fit_multinomial_logistic(dgp_a_2000, spec(CORRECT_SET["M4"]))
    tr = np.asarray(f.loglik_trace)
    assert np.all(np.diff(tr) >= -1e-9 * np.abs(tr[1:]))
    assert f.converged


def test_identical_treatments_are_separated():
    g = np.random.default_rng(3)
    a = g.integers(0, 2, 200).astype(float)
    a[:2] = [0, 1]
    d = make_dataset(np.zeros(200), a, a, g.standard_normal((200, 1)))
    with pytest.raises(SeparationError):
        fit_factored_binary(d, spec("X1", names=["X1"], family=FACTORED))


def test_perfectly_predictive_covariate_is_separated():
    a, b, g = random_arms(200, 4)
    X = (2 * a + b)[:, None].astype(float)
    X = np.column_stack([X, X**2, X**3])
    d = make_dataset(np.zeros(200), a, b, X, ["U", "V", "W"])
    with pytest.raises(SeparationError):
        fit_multinomial_logistic(d, spec("U + V + W", names=["U", "V", "W"]))


def test_empty_arm_raised_before_fitting():
    d = make_dataset([0, 0, 0], [1, 1, 0], [1, 0, 1], [[1.0], [2.0], [3.0]])
    with pytest.raises(EmptyArm):
        fit_multinomial_logistic(d, spec("X1", names=["X1"]))


def test_null_data_coefficients_within_three_standard_errors():
    a, b, g = random_arms(4000, 5)
    d = make_dataset(np.zeros(4000), a, b, g.standard_normal((4000, 2)), ["X1", "X2"])
    f = fit_multinomial_logistic(d, spec("X1 + X2", names=["X1", "X2"]))
    se = np.sqrt(np.diag(f.covariance))
    coef = f.stacked_coefficients
    slopes = [i for i in range(coef.size) if i % 3 != 0]
    assert np.all(np.abs(coef[slopes]) < 3 * se[slopes])


def test_parameter_recovery_under_the_true_model():
    d = dgp_a_sample(20000, 8)
    f = fit_multinomial_logistic(d, spec(CORRECT_SET["M4"]))
    se = np.sqrt(np.diag(f.covariance)).reshape(3, -1)
    truth = {
        (1, 1): (0.7, 0.4, 0.2, -0.2, -0.4, -0.4, 0.2, 0.2),
        (0, 1): (0.6, 0.2, 0.6, -0.4, -0.6, -0.2, 0.2, 0.2),
        (1, 0): (0.5, 0.6, 0.4, -0.2, -0.2, -0.2, 0.4, 0.4),
    }
    for k, arm in enumerate(f.coefficients):
        z = (f.coefficients[arm] - np.array(truth[arm])) / se[k]
        assert np.max(np.abs(z)) < 4.0, (arm, z)


def test_factored_binary_probabilities_are_a_distribution(dgp_a_2000):
    f = fit_propensity(dgp_a_2000, spec(CORRECT_SET["M2"], family=FACTORED))
    np.testing.assert_allclose(f.probs.sum(axis=1), 1.0, atol=1e-10)
    assert set(f.coefficients) == {"A", "B"}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(40, 200))
def test_fitted_probabilities_match_arm_frequencies_in_aggregate(seed, n):
    # score equations for the intercepts force column sums to equal arm counts
    a, b, g = random_arms(n, seed)
    d = make_dataset(np.zeros(n), a, b, g.standard_normal((n, 1)))
    try:
        f = fit_multinomial_logistic(d, spec("X1", names=["X1"]))
    except SeparationError:
        return
    for arm in ARMS:
        assert f.probs[:, arm_index(arm)].sum() == pytest.approx(d.arm_mask(arm).sum(), abs=1e-6)
