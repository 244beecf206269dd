"""Small expression language for coefficients in the variables t, x, y.

Supports numeric literals, ``pi``, the variables ``t``/``x``/``y``, unary
negation, ``+ - * /``, ``^`` with integer literal exponents, and the
functions ``sin``, ``cos``, ``exp``.  Trees are immutable, evaluate on
scalars or numpy arrays, and can be differentiated exactly with respect
to any of the three variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VARIABLES = ("t", "x", "y")
FUNCTIONS = ("sin", "cos", "exp")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax error; carries the byte offset of the offending token."""

    def __init__(self, message, offset):
        super().__init__(f"syntax error at byte {offset}: {message}")
        self.offset = offset


class EvalError(ExprError):
    """Raised when evaluation hits division by zero."""


@dataclass(frozen=True)
class Expr:
    """Base node; concrete nodes below. Frozen, so trees are shareable."""

    def __call__(self, t=0.0, x=0.0, y=0.0):
        return evaluate(self, t, x, y)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int  # nonnegative integer only


@dataclass(frozen=True)
class Call(Expr):
    func: str  # sin | cos | exp
    arg: Expr


ZERO = Num(0.0)
ONE = Num(1.0)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_CHARS = set("+-*/^()")


class _Tokenizer:
    def __init__(self, source):
        self.source = source
        self.pos = 0

    def _byte_offset(self, pos):
        return len(self.source[:pos].encode("utf-8"))

    def error(self, message, pos=None):
        raise ParseError(message, self._byte_offset(self.pos if pos is None else pos))

    def peek(self):
        """Next token as (kind, text, pos) without consuming it."""
        s, i = self.source, self.pos
        while i < len(s) and s[i].isspace():
            i += 1
        self.pos = i
        if i >= len(s):
            return ("end", "", i)
        c = s[i]
        if c in _TOKEN_CHARS:
            return (c, c, i)
        if c.isdigit() or c == ".":
            j = i
            while j < len(s) and (s[j].isdigit() or s[j] == "."):
                j += 1
            if j < len(s) and s[j] in "eE":
                k = j + 1
                if k < len(s) and s[k] in "+-":
                    k += 1
                if k < len(s) and s[k].isdigit():
                    j = k
                    while j < len(s) and s[j].isdigit():
                        j += 1
            return ("number", s[i:j], i)
        if c.isalpha() or c == "_":
            j = i
            while j < len(s) and (s[j].isalnum() or s[j] == "_"):
                j += 1
            return ("ident", s[i:j], i)
        self.error(f"unexpected character {c!r}", i)

    def next(self):
        kind, text, pos = self.peek()
        self.pos = pos + len(text)
        return kind, text, pos

    def expect(self, kind):
        got, text, pos = self.next()
        if got != kind:
            shown = text if text else "end of input"
            raise ParseError(f"expected {kind!r}, found {shown!r}", self._byte_offset(pos))
        return text


def parse(source: str) -> Expr:
    """Parse ``source`` into an Expr.

    Precedence: ``^`` over unary ``-`` over ``* /`` over ``+ -``; all binary
    operators associate left except ``^`` which associates right and only
    accepts integer literal exponents.
    """
    tok = _Tokenizer(source)
    if tok.peek()[0] == "end":
        tok.error("empty input")
    e = _parse_sum(tok)
    kind, text, pos = tok.peek()
    if kind != "end":
        raise ParseError(f"unexpected {text!r}", tok._byte_offset(pos))
    return e


def _parse_sum(tok):
    e = _parse_term(tok)
    while tok.peek()[0] in ("+", "-"):
        op = tok.next()[0]
        e = BinOp(op, e, _parse_term(tok))
    return e


def _parse_term(tok):
    e = _parse_unary(tok)
    while tok.peek()[0] in ("*", "/"):
        op = tok.next()[0]
        e = BinOp(op, e, _parse_unary(tok))
    return e


def _parse_unary(tok):
    if tok.peek()[0] == "-":
        tok.next()
        return Neg(_parse_unary(tok))
    return _parse_power(tok)


def _parse_power(tok):
    e = _parse_atom(tok)
    if tok.peek()[0] == "^":
        tok.next()
        return Pow(e, _parse_int_exponent(tok))
    return e


def _parse_int_exponent(tok):
    # Exponents are integer literals; a chain like 3^2 folds right to left.
    kind, text, pos = tok.next()
    if kind != "number" or not text.isdigit():
        tok.error("exponent must be an integer literal", pos)
    n = int(text)
    if tok.peek()[0] == "^":
        tok.next()
        n = n ** _parse_int_exponent(tok)
    return n


def _parse_atom(tok):
    kind, text, pos = tok.next()
    if kind == "number":
        try:
            return Num(float(text))
        except ValueError:
            tok.error(f"bad number literal {text!r}", pos)
    if kind == "(":
        e = _parse_sum(tok)
        tok.expect(")")
        return e
    if kind == "ident":
        if text in VARIABLES:
            return Var(text)
        if text == "pi":
            return Num(math.pi)
        if text in FUNCTIONS:
            tok.expect("(")
            arg = _parse_sum(tok)
            tok.expect(")")
            return Call(text, arg)
        tok.error(f"unknown identifier {text!r}", pos)
    shown = text if text else "end of input"
    tok.error(f"expected value, found {shown!r}", pos)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_NUMPY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def evaluate(e: Expr, t=0.0, x=0.0, y=0.0):
    """Evaluate at (t, x, y); scalars or broadcastable numpy arrays.

    Returns a float for scalar inputs, an ndarray otherwise.  Division by
    zero raises EvalError rather than returning inf/NaN.
    """
    env = {"t": t, "x": x, "y": y}
    out = _eval(e, env)
    if np.ndim(out) == 0 and not any(np.ndim(v) for v in env.values()):
        return float(out)
    return out


def _eval(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(b == 0.0):
            raise EvalError("division by zero")
        return a / b
    if isinstance(e, Pow):
        base = _eval(e.base, env)
        if np.ndim(base) == 0:
            return base ** e.exponent
        return np.power(base, e.exponent)
    if isinstance(e, Call):
        return _NUMPY_FUNCS[e.func](_eval(e.arg, env))
    raise TypeError(f"not an Expr node: {e!r}")


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Expr, var: str) -> Expr:
    """Exact derivative of ``e`` with respect to ``var`` (one of t, x, y).

    The result is built through folding constructors, so obvious zero and
    one factors vanish, but no further simplification is attempted.
    """
    if var not in VARIABLES:
        raise ValueError(f"unknown variable {var!r}")
    return _diff(e, var)


def _diff(e, var):
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(_diff(e.arg, var))
    if isinstance(e, BinOp):
        da, db = _diff(e.left, var), _diff(e.right, var)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        num = sub(mul(da, e.right), mul(e.left, db))
        return div(num, Pow(e.right, 2))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return ZERO
        inner = _diff(e.base, var)
        return mul(mul(Num(float(e.exponent)), pow_int(e.base, e.exponent - 1)), inner)
    if isinstance(e, Call):
        inner = _diff(e.arg, var)
        if e.func == "sin":
            return mul(Call("cos", e.arg), inner)
        if e.func == "cos":
            return mul(neg(Call("sin", e.arg)), inner)
        return mul(Call("exp", e.arg), inner)
    raise TypeError(f"not an Expr node: {e!r}")


# Folding constructors; used by differentiate and by code that builds
# expressions programmatically (e.g. manufactured forcings).

def _is_const(e, v):
    return isinstance(e, Num) and e.value == v


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a, 0.0):
        return ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def pow_int(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    return Pow(base, exponent)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def to_source(e: Expr) -> str:
    """Canonical fully parenthesized rendering; reparses to an equal tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)}{e.op}{to_source(e.right)})"
    if isinstance(e, Pow):
        return f"({to_source(e.base)}^{e.exponent})"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    raise TypeError(f"not an Expr node: {e!r}")


def as_expr(value) -> Expr:
    """Coerce a string, number, or Expr to an Expr."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, float)):
        return Num(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")
