"""Minimal closed-form expression language for user-defined metric components.

Grammar (whitespace-insensitive)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("-" | "+") unary | power
    power := atom (("^" | "**") unary)?
    atom  := NUMBER | yK | exp(expr) | pow(expr, expr) | "(" expr ")"

Coordinates are named ``y1 .. yN`` (1-based). Exponents must not depend on
the coordinates, which keeps differentiation inside the grammar.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParseError


class Expr:
    def diff(self, var: int) -> "Expr":
        raise NotImplementedError

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def variables(self) -> set[int]:
        return set()


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def diff(self, var):
        return ZERO

    def evaluate(self, y):
        return np.full(np.shape(y)[:-1], self.value, dtype=float)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 0-based

    def diff(self, var):
        return ONE if var == self.index else ZERO

    def evaluate(self, y):
        return np.asarray(y, dtype=float)[..., self.index]

    def variables(self):
        return {self.index}

    def __str__(self):
        return f"y{self.index + 1}"


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def diff(self, var):
        return add(self.left.diff(var), self.right.diff(var))

    def evaluate(self, y):
        return self.left.evaluate(y) + self.right.evaluate(y)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} + {self.right})"


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def diff(self, var):
        return add(mul(self.left.diff(var), self.right), mul(self.left, self.right.diff(var)))

    def evaluate(self, y):
        return self.left.evaluate(y) * self.right.evaluate(y)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} * {self.right})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr  # coordinate-free

    def diff(self, var):
        db = self.base.diff(var)
        if db == ZERO:
            return ZERO
        lowered = power(self.base, add(self.exponent, Const(-1.0)))
        return mul(mul(self.exponent, lowered), db)

    def evaluate(self, y):
        return np.power(self.base.evaluate(y), self.exponent.evaluate(y))

    def variables(self):
        return self.base.variables()

    def __str__(self):
        return f"({self.base} ^ {self.exponent})"


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr

    def diff(self, var):
        return mul(self, self.arg.diff(var))

    def evaluate(self, y):
        return np.exp(self.arg.evaluate(y))

    def variables(self):
        return self.arg.variables()

    def __str__(self):
        return f"exp({self.arg})"


ZERO = Const(0.0)
ONE = Const(1.0)


# Smart constructors fold constants so derivative trees stay small.
def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Add(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Mul(a, b)


def neg(a: Expr) -> Expr:
    return mul(Const(-1.0), a)


def power(base: Expr, exponent: Expr) -> Expr:
    if exponent.variables():
        raise ParseError("exponent must not depend on coordinates")
    if isinstance(exponent, Const):
        if exponent.value == 0.0:
            return ONE
        if exponent.value == 1.0:
            return base
        if isinstance(base, Const):
            return Const(base.value ** exponent.value)
    return Pow(base, exponent)


def divide(a: Expr, b: Expr) -> Expr:
    return mul(a, power(b, Const(-1.0)))


def exp(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(float(np.exp(a.value)))
    return Exp(a)


_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/^(),]))")

Token = tuple[str, Union[str, float]]


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos:].strip()[:1]!r} in {text!r}")
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif name is not None:
            tokens.append(("name", name))
        else:
            tokens.append(("op", op))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else ("end", "")

    def take(self, op=None):
        tok = self.peek()
        if op is not None and tok != ("op", op):
            raise ParseError(f"expected {op!r} in {self.text!r}, got {tok[1]!r}")
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        if not self.tokens:
            raise ParseError("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            raise ParseError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else add(node, neg(rhs))
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else divide(node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return neg(self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() in (("op", "^"), ("op", "**")):
            self.take()
            return power(base, self.unary())
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return Const(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.take(")")
            return node
        if kind == "name":
            if val in ("exp", "pow"):
                self.take("(")
                first = self.expr()
                if val == "exp":
                    self.take(")")
                    return exp(first)
                self.take(",")
                second = self.expr()
                self.take(")")
                return power(first, second)
            m = re.fullmatch(r"y(\d+)", val)
            if m is None:
                raise ParseError(f"unknown name {val!r} in {self.text!r}")
            idx = int(m.group(1))
            if idx < 1 or (self.dim is not None and idx > self.dim):
                raise ParseError(f"coordinate {val!r} out of range for dim={self.dim}")
            return Var(idx - 1)
        raise ParseError(f"unexpected token {val!r} in {self.text!r}")


def parse(text: str, dim: int | None = None) -> Expr:
    """Parse ``text`` into an expression tree; ``dim`` bounds coordinate names."""
    return _Parser(str(text), dim).parse()
