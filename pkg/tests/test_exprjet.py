import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from curvindex.exprjet import (
    ArityError,
    BinOp,
    Call,
    ExprSyntaxError,
    Jet,
    JetDomainError,
    Num,
    UnknownIdentifierError,
    Var,
    eval_jet,
    evaluate,
    parse,
    to_string,
)

X = ["x0", "x1"]


def test_power_binds_tighter_than_product():
    ast = parse("2*x0^3", ["x0"])
    assert ast == BinOp("*", Num(2.0), BinOp("^", Var(0, "x0"), Num(3.0)))


def test_function_power_plus_constant():
    ast = parse("sin(x0)^2 + 1", ["x0"])
    assert ast == BinOp("+", BinOp("^", Call("sin", Var(0, "x0")), Num(2.0)), Num(1.0))


def test_power_is_right_associative_and_unary_minus_is_looser():
    assert parse("x0^2^3", ["x0"]) == parse("x0^(2^3)", ["x0"])
    assert parse("-x0^2", ["x0"]) == parse("-(x0^2)", ["x0"])
    assert evaluate(parse("2^-1", ["x0"]), np.array([0.0])) == 0.5


def test_unbalanced_parenthesis_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("((x0", ["x0"])
    assert err.value.offset == 4


def test_unknown_identifier_and_arity():
    with pytest.raises(UnknownIdentifierError):
        parse("y + 1", ["x0"])
    with pytest.raises(ArityError):
        parse("sin(x0, x0)", ["x0"])


def test_product_jet():
    j = eval_jet(parse("x0*x1", X), np.array([2.0, 3.0]), 1)
    assert j.value == 6.0
    assert j.partial(0) == 3.0
    assert j.partial(1) == 2.0


def test_sine_jet_to_third_order():
    j = eval_jet(parse("sin(x0)", ["x0"]), np.array([0.0]), 3)
    assert [j.value, j.partial(0), j.partial(0, 0), j.partial(0, 0, 0)] == pytest.approx([0, 1, 0, -1], abs=1e-15)


def test_log_domain_error_names_node():
    with pytest.raises(JetDomainError) as err:
        eval_jet(parse("log(x0)", ["x0"]), np.array([0.0]), 1)
    assert isinstance(err.value.node, Call) and err.value.node.func == "log"


def test_batched_points_match_single_points():
    ast = parse("exp(x0)*cos(x1) + x0^2/x1", X)
    pts = np.array([[0.3, 1.2, -0.4], [0.9, 1.5, 2.0]])
    batch = eval_jet(ast, pts, 2).values
    for k in range(3):
        single = eval_jet(ast, pts[:, k], 2).values
        np.testing.assert_allclose(batch[:, k], single, rtol=1e-15)


# random expressions on a domain where every function is smooth
_LEAF = st.one_of(st.sampled_from(["x0", "x1"]), st.integers(1, 4).map(str))


def _combine(children):
    unary = st.tuples(st.sampled_from(["sin", "cos", "exp", "tanh", "sinh"]), children).map(
        lambda t: f"{t[0]}({t[1]})")
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]}{t[1]}{t[2]})")
    square = children.map(lambda c: f"({c})^2")
    return st.one_of(unary, binary, square)


EXPR = st.recursive(_LEAF, _combine, max_leaves=6)
POINT = st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(np.array)


def _close(a, b, rel=1e-12):
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) <= rel * scale


@settings(max_examples=60, deadline=None)
@given(EXPR, EXPR, POINT)
def test_leibniz_rule(a, b, p):
    ja, jb = eval_jet(parse(a, X), p, 3), eval_jet(parse(b, X), p, 3)
    jab = eval_jet(parse(f"({a})*({b})", X), p, 3)
    assert _close(jab.values, (ja * jb).values)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["sin", "cos", "tan", "sinh", "cosh", "tanh", "exp"]), EXPR, POINT)
def test_chain_rule(func, inner, p):
    v = evaluate(parse(inner, X), p)
    assume(abs(v) < 20)
    assume(func != "tan" or abs(math.cos(v)) > 0.2)
    ji = eval_jet(parse(inner, X), p, 3)
    jf = eval_jet(parse(f"{func}({inner})", X), p, 3)
    assert _close(jf.values, ji.apply(func).values, 1e-11)


def test_chain_rule_log_sqrt_on_positive_inner():
    p = np.array([0.4, 0.7])
    inner = "2 + x0*x1"
    ji = eval_jet(parse(inner, X), p, 3)
    for func in ("log", "sqrt"):
        jf = eval_jet(parse(f"{func}({inner})", X), p, 3)
        assert _close(jf.values, ji.apply(func).values)


def _fd_partials(ast, p, h=1e-5):
    n = len(p)
    f = lambda q: evaluate(ast, q)
    first = np.zeros(n)
    second = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        first[i] = (f(p + e) - f(p - e)) / (2 * h)
        for j in range(n):
            d = np.zeros(n)
            d[j] = h
            second[i, j] = (f(p + e + d) - f(p + e - d) - f(p - e + d) + f(p - e - d)) / (4 * h * h)
    return first, second


TXYZ = ["t", "x", "y", "z"]


@pytest.mark.parametrize("source,names", [
    ("sin(x0)^2", X), ("1/x1^2", X), ("(t)^2", TXYZ), ("exp(t)^2", TXYZ), ("sin(x0)^2*sin(x1)^2", X),
    ("(t^2)^2/(1+1*(x^2+y^2+z^2)/4)^2", TXYZ),
])
def test_partials_match_central_differences(source, names):
    ast = parse(source, names)
    p = np.array([0.7, 1.1, 0.2, -0.3][: len(names)])
    j = eval_jet(ast, p, 2)
    first, second = _fd_partials(ast, p)
    n = len(names)
    got1 = np.array([j.partial(i) for i in range(n)])
    got2 = np.array([[j.partial(i, k) for k in range(n)] for i in range(n)])
    assert _close(got1, first, 1e-5)
    assert _close(got2, second, 1e-5)


CORPUS = [
    "1", "x0", "-x0", "--x0", "x0+x1", "x0-x1", "x0*x1", "x0/x1", "x0^2", "x0^-2", "x0^2^3", "(x0^2)^3",
    "-x0^2", "(-x0)^2", "2*x0^3", "sin(x0)^2 + 1", "sin(x0^2)", "cos(x0)*sin(x1)", "exp(-x0^2)",
    "log(1+x0^2)", "sqrt(1+x1^2)", "tan(x0/4)", "sinh(x0)-cosh(x1)", "tanh(x0*x1)", "pi*x0", "e^x0",
    "x0/x1/2", "x0/(x1/2)", "x0-x1-1", "x0-(x1-1)", "1.5e-3*x0", "2.5*x1^0.5", "x0^x1", "(x0+x1)^(x0-x1)",
    "1/(1+x0^2)^2", "sin(cos(exp(x0)))", "-(x0+x1)*-(x0-x1)", "x0*-x1", "x0^-x1", "3-2-1", "3/2/1",
    "(1)", "((x0))", "exp(x0)*exp(-x0)", "sin(x0)^2+cos(x0)^2", "x0^8", "x0^9", "0.25*(x0^2+x1^2)",
    "1/(1-1*(x0^2+x1^2)/4)^2", "sqrt(x0^2+x1^2+1)*log(2+sin(x1))", "-1", "-(-(-x0))", "x1^3.5",
]


def test_round_trip_corpus():
    assert len(CORPUS) >= 50
    for s in CORPUS:
        ast = parse(s, X)
        again = parse(to_string(ast), X)
        assert again == ast, s
        assert to_string(again) == to_string(ast)


def test_round_trip_preserves_values():
    p = np.array([0.6, 0.8])
    for s in CORPUS:
        ast = parse(s, X)
        assert evaluate(parse(to_string(ast), X), p) == evaluate(ast, p)


def test_jet_arithmetic_keeps_shape():
    a = eval_jet(parse("x0", X), np.array([1.0, 2.0]), 3)
    b = eval_jet(parse("x1", X), np.array([1.0, 2.0]), 3)
    for c in (a + b, a - b, a * b, a / b, 2 * a, a - 1):
        assert isinstance(c, Jet) and c.values.shape == a.values.shape
    assert (a / b).partial(1) == pytest.approx(-1 / 4)
