"""Arithmetic expressions over ``x1 .. xd``, compiled to batched numpy evaluators.

Grammar, loosest binding first::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := primary ("^" unary)?          # right-associative
    primary := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

so ``-x1^2`` is ``-(x1^2)`` and ``2^-1`` is ``0.5``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExpressionError",
    "Expression",
    "Num",
    "Var",
    "Unary",
    "Binary",
    "Call",
    "parse_expression",
    "FUNCTIONS",
    "CONSTANTS",
]

FUNCTIONS = {
    "ln": np.log,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "abs": np.abs,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


class ExpressionError(ValueError):
    """Syntax or name error, with a 1-based line and column."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero-based


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


Node = Union[Num, Var, Unary, Binary, Call]


def _eval(node: Node, x: np.ndarray):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x[:, node.index]
    if isinstance(node, Unary):
        v = _eval(node.arg, x)
        return -v if node.op == "-" else v
    if isinstance(node, Call):
        return FUNCTIONS[node.name](_eval(node.arg, x))
    a = _eval(node.left, x)
    b = _eval(node.right, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return np.divide(a, b)
    return np.power(a, b)


@dataclass(frozen=True)
class Expression:
    """Parsed expression; calling it evaluates a batch of points ``(batch, dim)``."""

    root: Node
    dim: int
    text: str

    def variables(self) -> set[int]:
        found = set()

        def walk(node):
            if isinstance(node, Var):
                found.add(node.index)
            elif isinstance(node, (Unary, Call)):
                walk(node.arg)
            elif isinstance(node, Binary):
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return found

    def __call__(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(f"expected points of shape (batch, {self.dim}), got {x.shape}")
        with np.errstate(all="ignore"):
            out = np.asarray(_eval(self.root, x), dtype=float)
        return np.broadcast_to(out, (x.shape[0],)).copy()


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _where(self, offset: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, offset) + 1
        col = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        return line, col

    def error(self, message: str, offset: int):
        raise ExpressionError(message, *self._where(offset))

    def _tokenize(self, text):
        tokens = []
        i = 0
        while True:
            while i < len(text) and text[i].isspace():
                i += 1
            if i >= len(text):
                break
            m = _TOKEN.match(text, i)
            if m is None or m.end() == i:
                self.error(f"unexpected character {text[i]!r}", i)
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start))
            i = m.end()
        tokens.append(("end", "", len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            self.error(f"expected {value!r}, found {found}", offset)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            self.error(f"unexpected {text!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            return Unary(text, self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def primary(self):
        kind, text, offset = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    self.error(f"unknown function {text!r}", offset)
                self.take()
                arg = self.expr()
                k2, t2, o2 = self.peek()
                if t2 == "," and k2 == "op":
                    self.error(f"function {text!r} takes exactly one argument", o2)
                self.expect(")")
                return Call(text, arg)
            if text in FUNCTIONS:
                self.error(f"function {text!r} requires an argument list", offset)
            if text in CONSTANTS:
                return Num(float(CONSTANTS[text]))
            m = re.fullmatch(r"x([1-9]\d*)", text)
            if m is None:
                self.error(f"unknown identifier {text!r}", offset)
            index = int(m.group(1))
            if index > self.dim:
                self.error(f"variable {text!r} exceeds dimension {self.dim}", offset)
            return Var(index - 1)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        self.error(f"unexpected {found}", offset)


def parse_expression(text: str, dim: int) -> Expression:
    """Parse ``text`` into an :class:`Expression` over ``x1 .. x{dim}``."""
    if not text or not text.strip():
        raise ExpressionError("empty expression", 1, 1)
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    return Expression(_Parser(text, dim).parse(), dim, text)
