import numpy as np
import pytest
from hypothesis import given, strategies as st

from polylap.errors import ExprSyntaxError, NonDifferentiableError, UnknownIdentifierError, VariableIndexError
from polylap.expr import catalog_field, differentiate, eval_field, parse_expression, to_text


def test_evaluates_arithmetic():
    assert eval_field(parse_expression("x1^2", 1), [3.0]) == 9.0
    assert eval_field(parse_expression("sin(x1)*exp(-x2^2)", 2), [0.0, 0.0]) == 0.0
    assert eval_field(parse_expression("exp(-x1^2)", 1), [0.0]) == 1.0
    assert eval_field(parse_expression("abs(x1)^3", 1), [-2.0]) == 8.0


def test_unary_minus_binds_looser_than_power():
    assert eval_field(parse_expression("-x1^2", 1), [3.0]) == -9.0
    assert eval_field(parse_expression("exp(-x1^2)", 1), [2.0]) == pytest.approx(np.exp(-4.0))


def test_syntax_error_reports_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expression("x1+*x2", 2)
    assert info.value.offset == 3
    assert "offset 3" in str(info.value)


def test_identifier_errors():
    with pytest.raises(UnknownIdentifierError):
        parse_expression("log(x1)", 1)
    with pytest.raises(VariableIndexError):
        parse_expression("x3", 2)


def test_derivatives():
    pts = np.random.default_rng(0).normal(size=(20, 2))
    d = differentiate(parse_expression("x1^2", 1), (1,))
    assert np.allclose(d(pts[:, :1]), 2 * pts[:, 0])
    d = differentiate(parse_expression("x1*x2", 2), (1, 0))
    assert np.allclose(d(pts), pts[:, 1])
    d = differentiate(parse_expression("sin(x1)", 1), (2,))
    assert np.allclose(d(pts[:, :1]), -np.sin(pts[:, 0]))
    f = parse_expression("x1^3+x2", 2)
    assert differentiate(f, (0, 0)) is f or np.allclose(differentiate(f, (0, 0))(pts), f(pts))


def test_abs_derivative_rules():
    even = parse_expression("abs(x1)^4", 1)
    assert np.allclose(differentiate(even, (1,))(np.array([[-1.5], [2.0]])), [4 * (-1.5) ** 3, 32.0])
    with pytest.raises(NonDifferentiableError):
        differentiate(parse_expression("abs(x1)^3", 1), (1,))


def test_growth_inference():
    assert parse_expression("x1^2*x2+1", 2).growth_order == 3
    assert parse_expression("exp(-x1^2)", 1).growth_order == 0
    assert parse_expression("x1^2+sin(x1)", 1).growth_order == 2
    assert parse_expression("exp(x1)", 1, growth_order=7).growth_order == 7
    assert catalog_field("x3").growth_order == 3


_leaf = st.sampled_from(["x1", "x2", "1.5", "3", "sin(x1)", "exp(-x2^2)", "cos(x1)"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0:
        return draw(_leaf)
    op = draw(st.sampled_from(["+", "-", "*", "^", "leaf", "neg"]))
    if op == "leaf":
        return draw(_leaf)
    if op == "neg":
        return "-(" + draw(expressions(depth=depth - 1)) + ")"
    if op == "^":
        return "(" + draw(expressions(depth=depth - 1)) + ")^" + str(draw(st.integers(0, 3)))
    return "(" + draw(expressions(depth=depth - 1)) + op + draw(expressions(depth=depth - 1)) + ")"


@given(expressions())
def test_round_trip_through_printer(text):
    f = parse_expression(text, 2)
    g = parse_expression(to_text(f.ast), 2)
    pts = np.random.default_rng(5).uniform(-2, 2, size=(100, 2))
    assert np.allclose(f(pts), g(pts), rtol=1e-12, atol=1e-12)


@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4), st.sampled_from([0.3, -0.7, 1.1]))
def test_polynomial_derivative_matches_difference_quotient(coeffs, x):
    text = "+".join(f"({c})*x1^{i}" for i, c in enumerate(coeffs))
    f = parse_expression(text, 1)
    d = differentiate(f, (1,))
    errs = []
    for h in (1e-2, 5e-3):
        fd = (f(np.array([[x + h]])) - f(np.array([[x]]))) / h
        errs.append(abs(fd[0] - d(np.array([[x]]))[0]))
    assert errs[1] <= errs[0] * 0.6 + 1e-9
