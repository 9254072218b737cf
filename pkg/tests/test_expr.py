import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abeltc.expr import (
    ArityError, BinOp, Call, Const, DomainError, ExprSyntaxError, LexError, Neg,
    UnboundVariableError, UnknownFunctionError, Var, differentiate, evaluate, parse,
    to_text, tokenize,
)

from oracles import central_difference


def kinds(source):
    return [(tok.kind, tok.lexeme) for tok in tokenize(source)]


def test_tokenize_simple_product():
    assert kinds("2*t^3") == [
        ("number", "2"), ("operator", "*"), ("identifier", "t"), ("operator", "^"), ("number", "3"),
    ]


def test_tokenize_scientific_notation():
    assert kinds("sin(x)+1e-2") == [
        ("identifier", "sin"), ("lparen", "("), ("identifier", "x"), ("rparen", ")"),
        ("operator", "+"), ("number", "1e-2"),
    ]


def test_tokenize_rejects_unknown_character():
    with pytest.raises(LexError) as info:
        tokenize("2 @ 3")
    assert info.value.position == 2


def test_token_positions_increase():
    positions = [tok.position for tok in tokenize(" 1.5e3 * sin( x_1 ) ")]
    assert positions == sorted(set(positions))


@pytest.mark.parametrize("source", ["", "   "])
def test_tokenize_rejects_empty(source):
    with pytest.raises(LexError):
        tokenize(source)


def test_parse_precedence():
    assert parse("1-2*x") == BinOp("-", Const(1.0), BinOp("*", Const(2.0), Var("x")))


def test_unary_minus_binds_looser_than_power():
    assert parse("-x^2") == Neg(BinOp("^", Var("x"), Const(2.0)))
    assert evaluate(parse("-x^2"), {"x": 3.0}) == -9.0


def test_power_is_right_associative():
    assert evaluate(parse("2^3^2"), {}) == 512.0
    assert evaluate(parse("2^-1"), {}) == 0.5


def test_named_constants_are_folded():
    assert parse("pi") == Const(math.pi)
    assert parse("e") == Const(math.e)


def test_pow_call():
    assert evaluate(parse("pow(x, 3)"), {"x": 2.0}) == 8.0


@pytest.mark.parametrize("source", ["sin()", "sin(x, x)", "pow(x)"])
def test_arity_errors(source):
    with pytest.raises(ArityError):
        parse(source)


def test_unknown_function():
    with pytest.raises(UnknownFunctionError):
        parse("gamma(x)")


@pytest.mark.parametrize("source, offset", [("1+", 2), ("(x", 2), ("x y", 2), ("1*)", 2)])
def test_syntax_error_positions(source, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(source)
    assert info.value.position == offset


def test_variable_restriction():
    assert parse("t^2", "t") == BinOp("^", Var("t"), Const(2.0))
    with pytest.raises(ExprSyntaxError, match="unknown variable 'x'"):
        parse("x^2", "t")


def test_evaluate_pythagorean_identity():
    assert evaluate(parse("sin(x)^2+cos(x)^2"), {"x": 0.7}) == pytest.approx(1.0, abs=1e-15)


def test_evaluate_pi_x_cubed():
    assert evaluate(parse("pi*x^3"), {"x": 1.0}) == math.pi


def test_evaluate_domain_errors_name_subexpression():
    with pytest.raises(DomainError) as info:
        evaluate(parse("1 + sqrt(x)"), {"x": -1.0})
    assert info.value.subexpression == "sqrt(x)"
    with pytest.raises(DomainError):
        evaluate(parse("log(x)"), {"x": 0.0})
    with pytest.raises(DomainError):
        evaluate(parse("exp(x)"), {"x": 1000.0})
    with pytest.raises(DomainError):
        evaluate(parse("1/x"), {"x": 0.0})


def test_evaluate_unbound_variable():
    with pytest.raises(UnboundVariableError):
        evaluate(parse("x+1"), {})


def test_evaluate_vectorized():
    xs = np.linspace(0.0, 1.0, 5)
    np.testing.assert_array_equal(evaluate(parse("2*x"), {"x": xs}), 2 * xs)
    assert evaluate(parse("3"), {"x": xs}) == 3.0


def test_derivative_of_sin():
    assert differentiate(parse("sin(t)"), "t") == Call("cos", (Var("t"),))


def test_derivative_of_square():
    d = differentiate(parse("t^2"), "t")
    assert d == BinOp("*", Const(2.0), Var("t"))
    assert to_text(d) == "2.0*t"


def test_derivative_of_exp_matches_finite_difference():
    d = differentiate(parse("exp(t)"), "t")
    fd = central_difference(math.exp, 0.3)
    assert abs(evaluate(d, {"t": 0.3}) - fd) / fd <= 1e-8


@pytest.mark.parametrize(
    "source, expected",
    [
        ("t^t", lambda t: t**t * (math.log(t) + 1)),
        ("2^t", lambda t: 2**t * math.log(2)),
        ("tan(t)", lambda t: 1 / math.cos(t) ** 2),
        ("log(t)/t", lambda t: (1 - math.log(t)) / t**2),
        ("sqrt(t)", lambda t: 0.5 / math.sqrt(t)),
        ("abs(t-2)", lambda t: -1.0),
        ("pow(t, 3)", lambda t: 3 * t**2),
        ("-cos(t)", math.sin),
    ],
)
def test_derivative_rules(source, expected):
    d = differentiate(parse(source), "t")
    for t in (0.4, 0.9, 1.3):
        assert evaluate(d, {"t": t}) == pytest.approx(expected(t), rel=1e-14)


def test_derivative_is_folded():
    assert differentiate(parse("3*t + 5"), "t") == Const(3.0)
    assert differentiate(parse("x^2"), "t") == Const(0.0)
    assert to_text(differentiate(parse("t^3"), "t")) == "3.0*t^2.0"


def test_evaluation_is_deterministic():
    node = parse("exp(sin(x))^1.5 / (1 + x^2)")
    values = {evaluate(node, {"x": 0.123456789}) for _ in range(20)}
    assert len(values) == 1


# {{{ properties

_leaf = st.sampled_from(["x", "t", "2", "0.5", "3.25", "1e-3", "pi", "e"])


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children).map(
        lambda parts: f"{parts[0]} {parts[1]} {parts[2]}"
    )
    return st.one_of(
        binary,
        children.map(lambda c: f"({c})"),
        children.map(lambda c: f"-{c}"),
        st.tuples(st.sampled_from(["sin", "cos", "tan", "exp", "log", "sqrt", "abs"]), children).map(
            lambda parts: f"{parts[0]}({parts[1]})"
        ),
        st.tuples(children, children).map(lambda parts: f"pow({parts[0]}, {parts[1]})"),
    )


sources = st.recursive(_leaf, _combine, max_leaves=12)


@given(sources)
@settings(max_examples=200)
def test_canonical_text_round_trips(source):
    node = parse(source)
    assert parse(to_text(node)) == node


# Bounded grammar for the derivative check: values stay O(100) on [0.5, 1.5],
# so central differences with h = 1e-6 are accurate to ~1e-8 relative.
_d_leaf = st.sampled_from(["t", "t", "0.5", "1.5", "2"])


def _d_combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
            lambda p: f"({p[0]}) {p[1]} ({p[2]})"
        ),
        st.tuples(children, children).map(lambda p: f"({p[0]}) / (2 + cos({p[1]}))"),
        st.tuples(children, st.sampled_from(["2", "3"])).map(lambda p: f"({p[0]})^{p[1]}"),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda p: f"{p[0]}({p[1]})"),
        children.map(lambda c: f"exp(sin({c}))"),
        children.map(lambda c: f"sqrt(1 + ({c})^2)"),
        children.map(lambda c: f"log(2 + sin({c}))"),
        children.map(lambda c: f"-({c})"),
    )


bounded_sources = st.recursive(_d_leaf, _d_combine, max_leaves=6)


def check_derivative_against_finite_differences(source, points):
    node = parse(source, "t")
    d = differentiate(node, "t")
    worst = 0.0
    for t in points:
        exact = evaluate(d, {"t": t})
        if abs(exact) <= 1e-3:
            continue
        fd = central_difference(lambda s: evaluate(node, {"t": s}), t)
        worst = max(worst, abs(exact - fd) / abs(exact))
    return worst


@given(bounded_sources, st.lists(st.floats(0.5, 1.5), min_size=10, max_size=10))
@settings(max_examples=100)
def test_derivative_matches_finite_differences(source, points):
    assert check_derivative_against_finite_differences(source, points) <= 1e-6


# }}}
