import numpy as np
import pytest

from mrddi.data import make_dataset
from mrddi.errors import DomainError, ParseError, UnknownVariable
from mrddi.formula import Factor, FormulaTerm, build_design_matrix, parse_formula, variable

NAMES = ["X1", "X2", "X3", "X4", "X5"]


def test_simple_sum():
    assert parse_formula("X1 + X2", NAMES) == [variable("X1"), variable("X2")]


def test_full_interaction_model_has_seven_terms():
    terms = parse_formula("X1 + X2 + X3 + exp(X4) + exp(X5) + X1:X3 + X2:exp(X4)", NAMES)
    assert len(terms) == 7
    assert [t.kind for t in terms] == ["variable"] * 3 + ["exp", "exp", "interaction", "interaction"]
    assert terms[6].factors == (Factor("X2"), Factor("X4", "exp"))
    assert terms[5].args == ("X1", "X3")


def test_double_plus_is_a_parse_error_at_second_plus():
    with pytest.raises(ParseError) as info:
        parse_formula("X1 + + X2", NAMES)
    assert info.value.position == 5


@pytest.mark.parametrize("text", ["X1 +", "exp(X1", "X1 X2", "X1:X2:X3", "(X1)", "X1 * X2", "sq()"])
def test_malformed(text):
    with pytest.raises(ParseError):
        parse_formula(text, NAMES)


def test_unknown_variable_and_duplicates():
    with pytest.raises(UnknownVariable):
        parse_formula("X1 + Z", NAMES)
    with pytest.raises(ParseError):
        parse_formula("X1 + X1", NAMES)


def test_intercept_only_forms():
    assert parse_formula("", NAMES) == []
    assert parse_formula("1", NAMES) == []


def test_transform_name_can_be_a_variable():
    assert parse_formula("exp + log(exp)", ["exp"]) == [
        variable("exp"), FormulaTerm((Factor("exp", "log"),))]


def test_design_intercept_only():
    d = make_dataset([0, 1, 0], [1, 0, 0], [1, 0, 1], [[1.0], [2.0], [3.0]])
    np.testing.assert_array_equal(build_design_matrix(d, []), np.ones((3, 1)))


def test_design_square_and_interaction():
    d = make_dataset([0], [1], [1], [[2.0, 5.0, 3.0]], ["X1", "X2", "X3"])
    np.testing.assert_array_equal(build_design_matrix(d, parse_formula("sq(X1)")), [[1, 4]])
    d = make_dataset([0], [1], [1], [[1.0, 5.0, 3.0]], ["X1", "X2", "X3"])
    np.testing.assert_array_equal(build_design_matrix(d, parse_formula("X1:X3")), [[1, 3]])


def test_design_exp_log_and_domain_error():
    d = make_dataset([0, 0], [1, 0], [1, 0], [[1.0, 0.0], [np.e, -1.0]], ["P", "Q"])
    M = build_design_matrix(d, parse_formula("log(P) + exp(Q) + log(P):exp(Q)"))
    np.testing.assert_allclose(M, [[1, 0, 1, 0], [1, 1, np.exp(-1), np.exp(-1)]])
    with pytest.raises(DomainError):
        build_design_matrix(d, parse_formula("log(Q)"))


def test_design_is_deterministic():
    d = make_dataset([0, 1], [1, 0], [1, 0], [[1.0, 2.0], [3.0, 4.0]], ["X1", "X2"])
    t = parse_formula("X2 + X1:X2 + sq(X1)")
    a = build_design_matrix(d, t)
    b = build_design_matrix(d, t)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, [[1, 2, 2, 1], [1, 4, 12, 9]])
