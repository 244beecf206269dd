import math

import numpy as np
import pytest

from rdcomp import expr
from rdcomp.expr import (
    BinOp,
    Call,
    EvalError,
    Num,
    ParseError,
    Var,
    differentiate,
    evaluate,
    parse,
    to_source,
)

# Expressions used by the bundled configurations; the property tests below
# sweep all of them.
CONFIG_SOURCES = [
    "(2.1+cos(x)*cos(y))*(1.1+cos(t))",
    "(1.5+sin(x)*sin(y))*(1.2+sin(t))",
    "(1.1+sin(t))*(2.0+sin(y))",
    "(2.0+cos(t))*(1.1+cos(x))",
    "(1.1+sin(t))*(1.1+cos(y))",
    "(1.2+2.5*pi^2*exp(-(x-0.5)^2-(y-0.5)^2))*(1.0+0.3*cos(t))",
]


def rand_points(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.05, 0.95, size=(n, 3))


def central_diff(e, var, t, x, y, h=1e-5):
    args = {"t": t, "x": x, "y": y}
    hi = dict(args)
    lo = dict(args)
    hi[var] += h
    lo[var] -= h
    return (evaluate(e, **hi) - evaluate(e, **lo)) / (2 * h)


class TestParse:
    def test_zero_literal(self):
        assert parse("0") == Num(0.0)

    def test_growth_rate_ast(self):
        got = parse("(1.5+sin(x)*sin(y))*(1.2+sin(t))")
        want = BinOp(
            "*",
            BinOp("+", Num(1.5), BinOp("*", Call("sin", Var("x")), Call("sin", Var("y")))),
            BinOp("+", Num(1.2), Call("sin", Var("t"))),
        )
        assert got == want

    def test_unbalanced_paren_offset(self):
        with pytest.raises(ParseError) as err:
            parse("sin(x")
        assert err.value.offset == 5

    def test_empty_input(self):
        with pytest.raises(ParseError):
            parse("")
        with pytest.raises(ParseError):
            parse("   ")

    def test_unknown_identifier(self):
        with pytest.raises(ParseError, match="unknown identifier"):
            parse("2*zeta")

    def test_non_integer_exponent_rejected(self):
        with pytest.raises(ParseError, match="integer"):
            parse("x^2.5")
        with pytest.raises(ParseError, match="integer"):
            parse("x^(2)")

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse("1+2)")


class TestEvaluate:
    def test_addition(self):
        assert evaluate(parse("2+3")) == 5.0

    def test_sin_pi_half(self):
        assert evaluate(parse("sin(pi/2)")) == pytest.approx(1.0, abs=1e-15)

    def test_carrying_capacity_at_origin(self):
        # hand arithmetic: (2.1+1)*(1.1+1)
        k = parse("(2.1+cos(x)*cos(y))*(1.1+cos(t))")
        assert evaluate(k, 0.0, 0.0, 0.0) == pytest.approx(6.51, abs=1e-12)

    def test_precedence(self):
        assert evaluate(parse("2+3*4")) == 14.0
        assert evaluate(parse("2^3^2")) == 512.0
        assert evaluate(parse("-2^2")) == -4.0

    def test_division_by_zero_raises(self):
        with pytest.raises(EvalError):
            evaluate(parse("1/x"), 0.0, 0.0, 0.0)
        with pytest.raises(EvalError):
            evaluate(parse("t/(x-1)"), 1.0, np.array([0.5, 1.0]), 0.0)

    def test_array_evaluation_matches_scalar(self):
        e = parse(CONFIG_SOURCES[0])
        pts = rand_points(32, seed=3)
        vec = evaluate(e, pts[:, 0], pts[:, 1], pts[:, 2])
        for i in range(len(pts)):
            assert vec[i] == evaluate(e, *pts[i])

    def test_scalar_inputs_give_float(self):
        assert isinstance(evaluate(parse("x+t"), 1.0, 2.0, 3.0), float)


class TestDifferentiate:
    def test_dt_of_shifted_sin(self):
        d = differentiate(parse("1.1+sin(t)"), "t")
        for t in np.linspace(0, 6, 13):
            assert evaluate(d, t, 0, 0) == pytest.approx(math.cos(t), abs=1e-14)

    def test_second_derivative(self):
        e = parse("2.0+sin(y)")
        dyy = differentiate(differentiate(e, "y"), "y")
        for y in np.linspace(0, 1, 7):
            assert evaluate(dyy, 0, 0, y) == pytest.approx(-math.sin(y), abs=1e-14)

    def test_growth_rate_dx_vs_central_difference(self):
        e = parse("(1.5+sin(x)*sin(y))*(1.2+sin(t))")
        d = differentiate(e, "x")
        for t, x, y in rand_points(100, seed=7):
            fd = central_diff(e, "x", t, x, y)
            assert evaluate(d, t, x, y) == pytest.approx(fd, abs=1e-6)

    @pytest.mark.parametrize("source", CONFIG_SOURCES)
    @pytest.mark.parametrize("var", ["t", "x", "y"])
    def test_derivative_matches_central_difference(self, source, var):
        e = parse(source)
        d = differentiate(e, var)
        for t, x, y in rand_points(100, seed=11):
            val = evaluate(d, t, x, y)
            fd = central_diff(e, var, t, x, y)
            assert abs(val - fd) <= 1e-5 * (1 + abs(evaluate(e, t, x, y)))

    def test_power_rule_stays_in_grammar(self):
        d = differentiate(parse("(x-0.5)^3"), "x")
        # d/dx (x-1/2)^3 = 3 (x-1/2)^2, and the result must reparse
        reparsed = parse(to_source(d))
        for x in np.linspace(0, 1, 9):
            assert evaluate(reparsed, 0, x, 0) == pytest.approx(3 * (x - 0.5) ** 2, rel=1e-13)

    def test_constant_power_derivative_is_zero(self):
        assert evaluate(differentiate(parse("x^0"), "x"), 0, 2.0, 0) == 0.0


class TestPrinter:
    @pytest.mark.parametrize("source", CONFIG_SOURCES + ["-2^2", "2^3^2", "1/(2+x)"])
    def test_roundtrip_evaluates_identically(self, source):
        e = parse(source)
        back = parse(to_source(e))
        for t, x, y in rand_points(25, seed=23):
            assert evaluate(back, t, x, y) == evaluate(e, t, x, y)

    @pytest.mark.parametrize("source", CONFIG_SOURCES)
    @pytest.mark.parametrize("var", ["t", "x", "y"])
    def test_roundtrip_of_derivatives(self, source, var):
        d = differentiate(parse(source), var)
        back = parse(to_source(d))
        for t, x, y in rand_points(10, seed=29):
            assert evaluate(back, t, x, y) == evaluate(d, t, x, y)


def test_structural_equality_implies_equal_evaluation():
    a = parse(CONFIG_SOURCES[1])
    b = parse(CONFIG_SOURCES[1])
    assert a == b
    for t, x, y in rand_points(20, seed=31):
        assert evaluate(a, t, x, y) == evaluate(b, t, x, y)


def test_as_expr_coercion():
    assert expr.as_expr(2) == Num(2.0)
    assert expr.as_expr("x") == Var("x")
    e = parse("x+1")
    assert expr.as_expr(e) is e
