import numpy as np
import pytest

from modules.errors import DomainError, ExprEvalError, ExprSyntaxError, UnknownIdentifierError
from modules.exprlang import (
    BinaryOp,
    Number,
    Variable,
    evaluate,
    free_variables,
    lipschitz_probe,
    parse,
    to_source,
)


@pytest.mark.parametrize(
    "source, expected",
    [
        ("1 + 2*3", 7.0),
        ("(1 + 2)*3", 9.0),
        ("-2*3", -6.0),
        ("2 - -1", 3.0),
        ("8/4/2", 1.0),
        ("10 - 4 - 3", 3.0),
        ("sin(0) + cos(0)", 1.0),
        ("sqrt(16) + abs(-2) + exp(0)", 7.0),
        ("1.5e2 + .5", 150.5),
    ],
)
def test_evaluate_constants(source, expected):
    assert evaluate(parse(source), 0.0, 0.0, 0.0) == pytest.approx(expected)


def test_evaluate_variables_on_arrays():
    t = np.array([0.0, 0.5, 1.0])
    x = np.array([1.0, 2.0, 3.0])
    y = np.array([-1.0, 0.0, 1.0])
    np.testing.assert_allclose(evaluate(parse("t*x + y"), t, x, y), t * x + y)


def test_evaluate_broadcasts_constant_expressions():
    t = np.linspace(0.0, 1.0, 5)
    values = evaluate(parse("2"), t, np.zeros(5), np.zeros(5))
    np.testing.assert_array_equal(values, np.full(5, 2.0))


def test_parse_tree_shape():
    expr = parse("x - y * 2")
    assert expr == BinaryOp("-", Variable("x"), BinaryOp("*", Variable("y"), Number(2.0)))


@pytest.mark.parametrize(
    "source, offset",
    [
        ("1 +", 3),
        ("(1 + 2", 6),
        ("1 $ 2", 2),
        ("sin x", 4),
        ("2 3", 2),
        ("2 * 1e999", 4),
    ],
)
def test_syntax_errors_report_offset(source, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(source)
    assert info.value.offset == offset
    assert f"at offset {offset}" in str(info.value)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("1 + tan(t)")
    assert info.value.offset == 4
    assert "tan" in str(info.value)


def test_offsets_are_utf8_byte_offsets():
    # the no-break space occupies two bytes
    with pytest.raises(UnknownIdentifierError) as info:
        parse("x\u00a0+ z")
    assert info.value.offset == 5


def test_division_by_zero_reports_position_and_index():
    with pytest.raises(ExprEvalError) as info:
        evaluate(parse("1/x"), np.zeros(3), np.array([1.0, 0.0, 2.0]), np.zeros(3))
    assert info.value.reason == "division by zero"
    assert info.value.position == 1
    assert info.value.index == 1


def test_sqrt_of_negative_argument():
    with pytest.raises(ExprEvalError, match="sqrt of negative argument"):
        evaluate(parse("sqrt(x - 1)"), 0.0, 0.0, 0.0)


def test_non_finite_result():
    with pytest.raises(ExprEvalError, match="non-finite"):
        evaluate(parse("exp(x)"), 0.0, 1000.0, 0.0)


def test_eval_error_pinned_to_t():
    error = ExprEvalError("division by zero", 3, index=7).at(0.25)
    assert error.t == 0.25
    assert error.index == 7
    assert "t = 0.25" in str(error)


def test_free_variables():
    assert free_variables(parse("sin(t) + 2*x")) == {"t", "x"}
    assert free_variables(parse("3")) == frozenset()


@pytest.mark.parametrize(
    "source, canonical",
    [
        ("((x))+1", "x + 1.0"),
        ("x - (y - t)", "x - (y - t)"),
        ("(x - y) - t", "x - y - t"),
        ("2*(x+1)", "2.0 * (x + 1.0)"),
        ("-(x*y)", "-(x * y)"),
        ("x / (y * t)", "x / (y * t)"),
        ("0.1*sin(x + y)", "0.1 * sin(x + y)"),
    ],
)
def test_to_source_canonical_form(source, canonical):
    assert to_source(parse(source)) == canonical


@pytest.mark.parametrize(
    "source",
    ["1 + 0.1*sin(x + y)", "cos(t) + 0.1*sin(x - y)", "--x", "2 - -1", "x/(1 + abs(x))", "-(x - y)*exp(-t)", "1e308*t"],
)
def test_to_source_reparses_to_same_tree(source):
    expr = parse(source)
    assert parse(to_source(expr)) == expr


def test_lipschitz_probe_linear_function():
    estimate = lipschitz_probe(parse("3*x - 2*y"), (-1.0, 1.0, -1.0, 1.0))
    assert estimate == pytest.approx(3.0, rel=1e-9)


def test_lipschitz_probe_sine_is_bounded_by_one():
    estimate = lipschitz_probe(parse("sin(x)"), (-10.0, 10.0, -10.0, 10.0))
    assert 0.9 <= estimate <= 1.0 + 1e-12


def test_lipschitz_probe_is_seeded():
    expr = parse("sin(x*y) + t")
    box = (-2.0, 2.0, -2.0, 2.0)
    assert lipschitz_probe(expr, box, seed=3) == lipschitz_probe(expr, box, seed=3)


def test_lipschitz_probe_constant_expression():
    assert lipschitz_probe(parse("cos(t)"), (-1.0, 1.0, -1.0, 1.0)) == 0.0


def test_lipschitz_probe_rejects_bad_arguments():
    with pytest.raises(DomainError):
        lipschitz_probe(parse("x"), (1.0, -1.0, 0.0, 1.0))
    with pytest.raises(DomainError):
        lipschitz_probe(parse("x"), (-1.0, 1.0, -1.0, 1.0), samples=10)
