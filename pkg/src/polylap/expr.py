"""Scalar fields on R^n given by a small expression language.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := '-' factor | atom ('^' nat)?
    atom   := number | 'x' nat | fn '(' expr ')' | '(' expr ')'
    fn     := sin | cos | exp | abs

Division and logarithms are deliberately absent so that evaluation is total.
Unary minus binds looser than ``^`` (``-x1^2`` is ``-(x1^2)``).
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import (
    ExprSyntaxError,
    NonDifferentiableError,
    UnknownIdentifierError,
    VariableIndexError,
)

FUNCTIONS = ("sin", "cos", "exp", "abs")


# --- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Fn:
    name: str
    arg: "Node"


Node = Union[Num, Var, Add, Sub, Mul, Neg, Pow, Fn]

ZERO = Num(0.0)
ONE = Num(1.0)


# Smart constructors fold constants so that derivative trees stay small.


def add(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return Sub(a, b)


def mul(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Mul(a, b)


def neg(a: Node) -> Node:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Node, p: int) -> Node:
    if p == 0:
        return ONE
    if p == 1:
        return a
    if isinstance(a, Num):
        return Num(a.value**p)
    return Pow(a, p)


# --- tokenizer and parser ---------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.take()
                node = Mul(node, self.factor())
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.factor())
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be a natural number", pos)
            return Pow(base, int(val))
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "var":
            idx = int(val[1:])
            if idx < 1 or idx > self.n:
                raise VariableIndexError(
                    f"variable {val} at offset {pos} exceeds dimension {self.n}"
                )
            return Var(idx - 1)
        if kind == "name":
            if val not in FUNCTIONS:
                raise UnknownIdentifierError(f"unknown identifier {val!r} at offset {pos}")
            self.expect_op("(")
            arg = self.expr()
            self.expect_op(")")
            return Fn(val, arg)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected token {val!r}", pos)


# --- tree utilities ---------------------------------------------------------


def to_text(node: Node) -> str:
    """Fully parenthesised text that parses back to an equivalent tree."""
    if isinstance(node, Num):
        v = node.value
        s = str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        return f"(-{s.lstrip('-')})" if v < 0 else s
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Add):
        return f"({to_text(node.left)} + {to_text(node.right)})"
    if isinstance(node, Sub):
        return f"({to_text(node.left)} - {to_text(node.right)})"
    if isinstance(node, Mul):
        return f"({to_text(node.left)} * {to_text(node.right)})"
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)})^{node.exponent}"
    if isinstance(node, Fn):
        return f"{node.name}({to_text(node.arg)})"
    raise TypeError(node)


_NP = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}


def evaluate(node: Node, coords) -> np.ndarray:
    """Evaluate on a tuple of coordinate arrays (one per variable)."""
    if isinstance(node, Num):
        return np.full(np.shape(coords[0]), node.value)
    if isinstance(node, Var):
        return np.asarray(coords[node.index], dtype=float)
    if isinstance(node, Add):
        return evaluate(node.left, coords) + evaluate(node.right, coords)
    if isinstance(node, Sub):
        return evaluate(node.left, coords) - evaluate(node.right, coords)
    if isinstance(node, Mul):
        return evaluate(node.left, coords) * evaluate(node.right, coords)
    if isinstance(node, Neg):
        return -evaluate(node.arg, coords)
    if isinstance(node, Pow):
        return evaluate(node.base, coords) ** node.exponent
    if isinstance(node, Fn):
        return _NP[node.name](evaluate(node.arg, coords))
    raise TypeError(node)


def _d(node: Node, i: int) -> Node:
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.index == i else ZERO
    if isinstance(node, Add):
        return add(_d(node.left, i), _d(node.right, i))
    if isinstance(node, Sub):
        return sub(_d(node.left, i), _d(node.right, i))
    if isinstance(node, Mul):
        return add(mul(_d(node.left, i), node.right), mul(node.left, _d(node.right, i)))
    if isinstance(node, Neg):
        return neg(_d(node.arg, i))
    if isinstance(node, Pow):
        base = node.base
        if isinstance(base, Fn) and base.name == "abs":
            if node.exponent % 2:
                raise NonDifferentiableError("abs(...) under an odd power is not differentiable")
            # |a|^(2m) = a^(2m)
            return _d(Pow(base.arg, node.exponent), i)
        inner = _d(base, i)
        return mul(mul(Num(float(node.exponent)), power(base, node.exponent - 1)), inner)
    if isinstance(node, Fn):
        inner = _d(node.arg, i)
        if node.name == "abs":
            raise NonDifferentiableError("abs(...) is not differentiable")
        if inner == ZERO:
            return ZERO
        if node.name == "sin":
            outer = Fn("cos", node.arg)
        elif node.name == "cos":
            outer = neg(Fn("sin", node.arg))
        else:
            outer = node
        return mul(outer, inner)
    raise TypeError(node)


@functools.lru_cache(maxsize=4096)
def _derivative(node: Node, alpha: tuple) -> Node:
    for i, a in enumerate(alpha):
        for _ in range(a):
            node = _d(node, i)
    return node


def is_polynomial(node: Node) -> bool:
    if isinstance(node, (Num, Var)):
        return True
    if isinstance(node, Fn):
        return False
    if isinstance(node, Pow):
        return is_polynomial(node.base)
    if isinstance(node, Neg):
        return is_polynomial(node.arg)
    return is_polynomial(node.left) and is_polynomial(node.right)


def growth_bound(node: Node) -> int:
    """Degree-type growth bound; built-in functions count as bounded."""
    if isinstance(node, Num):
        return 0
    if isinstance(node, Var):
        return 1
    if isinstance(node, Fn):
        return growth_bound(node.arg) if node.name == "abs" else 0
    if isinstance(node, Pow):
        return node.exponent * growth_bound(node.base)
    if isinstance(node, Neg):
        return growth_bound(node.arg)
    if isinstance(node, Mul):
        return growth_bound(node.left) + growth_bound(node.right)
    return max(growth_bound(node.left), growth_bound(node.right))


# --- fields -----------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """An expression tree over x1..xn with declared growth order.

    Calling the field on an array of shape ``(..., n)`` returns values of
    shape ``(...)``.
    """

    ast: Node
    dimension: int
    growth_order: int
    text: str = field(default="", compare=False)

    @property
    def is_polynomial(self) -> bool:
        return is_polynomial(self.ast)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dimension:
            raise ValueError(f"points have dimension {pts.shape[-1]}, field has {self.dimension}")
        return evaluate(self.ast, tuple(pts[..., i] for i in range(self.dimension)))

    def derivative(self, alpha) -> "ScalarField":
        return differentiate(self, alpha)

    def __str__(self):
        return to_text(self.ast)


def parse_expression(text: str, n: int, growth_order: int | None = None) -> ScalarField:
    """Parse ``text`` into a field on R^n.

    The growth order is the total degree for pure polynomials; otherwise the
    ``growth_order`` annotation is used, falling back to a degree-type bound
    in which sin, cos and exp count as bounded.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    ast = _Parser(text, n).parse()
    if growth_order is None:
        growth_order = growth_bound(ast)
    return ScalarField(ast, n, int(growth_order), text)


def differentiate(f: ScalarField, alpha) -> ScalarField:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != f.dimension:
        raise ValueError("multi-index length must equal the field dimension")
    if sum(alpha) == 0:
        return f
    ast = _derivative(f.ast, alpha)
    return ScalarField(ast, f.dimension, max(f.growth_order - sum(alpha), 0), to_text(ast))


def eval_field(f, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(f(x[None, :])[0])


@dataclass(frozen=True)
class CallableField:
    """A field backed by a vectorised Python callable (internal use and tests)."""

    func: Callable
    dimension: int
    growth_order: int
    is_polynomial: bool = False

    def __call__(self, points):
        return np.asarray(self.func(np.asarray(points, dtype=float)), dtype=float)


#: Fields used throughout the experiment suites, keyed by short name.
CATALOG = {
    "one": ("1", 1),
    "x": ("x1", 1),
    "x2": ("x1^2", 1),
    "x3": ("x1^3", 1),
    "x1x2": ("x1*x2", 2),
    "gauss": ("exp(-x1^2)", 1),
    "sin_gauss": ("sin(x1)*exp(-x1^2)", 1),
    "cos_gauss": ("cos(2*x1)*exp(-x1^2)", 1),
}


def catalog_field(name: str) -> ScalarField:
    text, n = CATALOG[name]
    return parse_expression(text, n)
