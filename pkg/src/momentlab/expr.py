"""One-variable arithmetic expressions.

Grammar (lowest to highest precedence)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | VARIABLE | FUNC "(" expr ")" | "(" expr ")"

``^`` binds tighter than unary minus and is right-associative, so
``-2^2`` is ``-(2^2)`` and ``2^3^2`` is ``2^(3^2)``.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ExprSyntaxError

FUNCTIONS = ("exp", "log", "abs", "sqrt")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("+", "-", "*", "/", "^")

MAX_DEPTH = 200
# one nesting level costs about five parser frames
_RECURSION_FLOOR = 2000


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str = "x"


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Constant, Variable, Unary, Binary]


# -- tokenizer ---------------------------------------------------------------

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


@dataclass
class _Token:
    kind: str  # "num", "name", "op", "lpar", "rpar", "end"
    text: str
    pos: int  # 1-based


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            tokens.append(_Token("num", m.group(0), i + 1))
            i = m.end()
            continue
        m = _NAME.match(text, i)
        if m:
            tokens.append(_Token("name", m.group(0), i + 1))
            i = m.end()
            continue
        if ch in "+-*/^":
            tokens.append(_Token("op", ch, i + 1))
        elif ch == "(":
            tokens.append(_Token("lpar", ch, i + 1))
        elif ch == ")":
            tokens.append(_Token("rpar", ch, i + 1))
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", i + 1)
        i += 1
    tokens.append(_Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, variable):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variable = variable
        self.level = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        tok = self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {found}", tok.pos, expected)

    def check(self, node_depth):
        if node_depth > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", self.tok.pos)
        return node_depth

    # Each rule returns (node, tree depth) so depth is bounded without recursion.
    def parse(self):
        node, _ = self.expr()
        if self.tok.kind != "end":
            self.fail("operator or end of input")
        return node

    def expr(self):
        node, d = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            right, dr = self.term()
            node, d = Binary(op, node, right), self.check(1 + max(d, dr))
        return node, d

    def term(self):
        node, d = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            right, dr = self.unary()
            node, d = Binary(op, node, right), self.check(1 + max(d, dr))
        return node, d

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            self.nest()
            child, d = self.unary()
            self.level -= 1
            return Unary("neg", child), self.check(d + 1)
        return self.power()

    def power(self):
        base, d = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            self.nest()
            exponent, de = self.unary()
            self.level -= 1
            return Binary("^", base, exponent), self.check(1 + max(d, de))
        return base, d

    def nest(self):
        # bounds the parser's own recursion, independent of tree depth
        self.level += 1
        if self.level > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", self.tok.pos)

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError("number out of double range", tok.pos)
            return Constant(value), 1
        if tok.kind == "name":
            self.advance()
            if tok.text == self.variable:
                return Variable(self.variable), 1
            if tok.text in FUNCTIONS:
                if self.tok.kind != "lpar":
                    self.fail(f"'(' after {tok.text}")
                self.advance()
                self.nest()
                child, d = self.expr()
                self.level -= 1
                if self.tok.kind != "rpar":
                    self.fail("')'")
                self.advance()
                return Unary(tok.text, child), self.check(d + 1)
            raise ExprSyntaxError(
                f"unknown name {tok.text!r}", tok.pos,
                f"variable {self.variable!r} or one of {', '.join(FUNCTIONS)}",
            )
        if tok.kind == "lpar":
            self.advance()
            self.nest()
            node = self.expr()
            self.level -= 1
            if self.tok.kind != "rpar":
                self.fail("')'")
            self.advance()
            return node
        self.fail("number, variable, function or '('")


def parse_expr(text: str, variable: str = "x") -> Expr:
    """Parse ``text`` into an expression tree in the single variable ``variable``.

    Raises ExprSyntaxError with a 1-based position on malformed input.
    """
    if not isinstance(text, str):
        raise ExprSyntaxError("expression must be a string", 1)
    if sys.getrecursionlimit() < _RECURSION_FLOOR:
        sys.setrecursionlimit(_RECURSION_FLOOR)
    try:
        return _Parser(text, variable).parse()
    except RecursionError:
        raise ExprSyntaxError("expression nested too deeply", 1) from None


def to_text(node: Expr) -> str:
    """Fully parenthesized text that parses back to an identical tree."""
    if isinstance(node, Constant):
        return repr(float(node.value))
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_text(node.child)})"
        return f"{node.op}({to_text(node.child)})"
    return f"({to_text(node.left)} {node.op} {to_text(node.right)})"


# -- evaluation ----------------------------------------------------------------

def _pow(base, exponent, node):
    if base == 0.0 and exponent < 0:
        raise DomainError("zero raised to a negative power", to_text(node))
    try:
        return math.pow(base, exponent)
    except ValueError:
        raise DomainError("negative base with non-integer exponent", to_text(node)) from None
    except OverflowError:
        if base < 0 and float(exponent).is_integer() and int(exponent) % 2 == 1:
            return -math.inf
        return math.inf


def eval_expr(node: Expr, value: float) -> float:
    """Evaluate ``node`` in double precision with the variable set to ``value``."""
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, Variable):
        return float(value)
    if isinstance(node, Unary):
        a = eval_expr(node.child, value)
        op = node.op
        if op == "neg":
            return -a
        if op == "abs":
            return abs(a)
        if op == "exp":
            try:
                return math.exp(a)
            except OverflowError:
                return math.inf
        if op == "log":
            if not a > 0:
                raise DomainError("log of a non-positive number", to_text(node))
            return math.log(a)
        if op == "sqrt":
            if a < 0:
                raise DomainError("sqrt of a negative number", to_text(node))
            return math.sqrt(a)
        raise ValueError(f"unknown unary operator {op!r}")
    a = eval_expr(node.left, value)
    b = eval_expr(node.right, value)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise DomainError("division by zero", to_text(node))
        return a / b
    if op == "^":
        return _pow(a, b, node)
    raise ValueError(f"unknown binary operator {op!r}")


def eval_array(node: Expr, values) -> np.ndarray:
    """Vectorized evaluation over an array of variable values."""
    x = np.asarray(values, dtype=float)
    with np.errstate(all="ignore"):
        return np.broadcast_to(_eval_array(node, x), x.shape).copy()


def _eval_array(node, x):
    if isinstance(node, Constant):
        return np.full(x.shape, node.value)
    if isinstance(node, Variable):
        return x
    if isinstance(node, Unary):
        a = _eval_array(node.child, x)
        op = node.op
        if op == "neg":
            return -a
        if op == "abs":
            return np.abs(a)
        if op == "exp":
            return np.exp(a)
        if op == "log":
            if np.any(~(a > 0)):
                raise DomainError("log of a non-positive number", to_text(node))
            return np.log(a)
        if op == "sqrt":
            if np.any(a < 0):
                raise DomainError("sqrt of a negative number", to_text(node))
            return np.sqrt(a)
        raise ValueError(f"unknown unary operator {op!r}")
    a = _eval_array(node.left, x)
    b = _eval_array(node.right, x)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if np.any(b == 0):
            raise DomainError("division by zero", to_text(node))
        return a / b
    if np.any((a == 0) & (b < 0)):
        raise DomainError("zero raised to a negative power", to_text(node))
    if np.any((a < 0) & (b != np.round(b))):
        raise DomainError("negative base with non-integer exponent", to_text(node))
    return np.power(a, b)


def depth(node: Expr) -> int:
    if isinstance(node, (Constant, Variable)):
        return 1
    if isinstance(node, Unary):
        return 1 + depth(node.child)
    return 1 + max(depth(node.left), depth(node.right))
