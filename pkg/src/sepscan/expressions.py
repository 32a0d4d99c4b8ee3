"""Small arithmetic expression language for user-supplied functions.

Supports numbers, variables ``x1..xs``, ``+ - * / ^`` with conventional
precedence (``^`` is right-associative and binds tighter than unary minus),
and the calls sin, cos, exp, log, sqrt, abs, pow. The printer emits a string
that parses back to a structurally identical tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionError
from .functions import BlackBoxFunction

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "pow": np.power,
}
_ARITY = {name: (2 if name == "pow" else 1) for name in _FUNCTIONS}


# --- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


# --- tokenizer --------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExpressionError(
                f"unexpected character {stripped[0]!r}", position=len(text) - len(stripped)
            )
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


# --- parser (recursive descent) ---------------------------------------------


class _Parser:
    def __init__(self, text: str, dimension: int):
        self.text = text
        self.dimension = dimension
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.next()
        if text != value:
            raise ExpressionError(f"expected {value!r}, found {text or 'end of input'!r}",
                                  position=pos)

    def parse(self):
        node = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {text!r} after expression", position=pos)
        return node

    def sum(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.next()
            # Right-associative; the exponent may start with a unary minus.
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.next()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(text, pos)
            return self.variable(text, pos)
        if text == "(":
            node = self.sum()
            self.expect(")")
            return node
        raise ExpressionError(f"expected a value, found {text or 'end of input'!r}",
                              position=pos)

    def call(self, name: str, pos: int):
        if name not in _FUNCTIONS:
            raise ExpressionError(f"unknown function {name!r}", position=pos)
        self.expect("(")
        args = [self.sum()]
        while self.peek()[1] == ",":
            self.next()
            args.append(self.sum())
        self.expect(")")
        if len(args) != _ARITY[name]:
            raise ExpressionError(
                f"{name} takes {_ARITY[name]} argument(s), got {len(args)}", position=pos
            )
        return Call(name, tuple(args))

    def variable(self, name: str, pos: int):
        m = re.fullmatch(r"x([1-9]\d*)", name)
        if not m:
            raise ExpressionError(f"unknown identifier {name!r}", position=pos)
        index = int(m.group(1))
        if index > self.dimension:
            raise ExpressionError(
                f"variable x{index} exceeds dimension {self.dimension}", position=pos
            )
        return Var(index)


def parse_expression(text: str, dimension: int):
    """Parse ``text`` into an AST, checking variable indices against ``dimension``."""
    return _Parser(text, dimension).parse()


# --- printer ----------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5
_BIN_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL, "^": _PREC_POW}


def pretty_print(node) -> str:
    """Render an AST to a string that reparses to an identical tree."""
    return _render(node, 0)


def _render(node, parent_prec: int) -> str:
    if isinstance(node, Num):
        text = repr(node.value)
        return text
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        text = "-" + _render(node.operand, _PREC_NEG)
        return f"({text})" if parent_prec > _PREC_NEG else text
    if isinstance(node, Call):
        args = ", ".join(_render(a, 0) for a in node.args)
        return f"{node.name}({args})"
    if isinstance(node, BinOp):
        prec = _BIN_PREC[node.op]
        if node.op == "^":
            # Left side must be an atom per the grammar; right side is a unary.
            left = _render(node.left, _PREC_ATOM)
            right = _render(node.right, _PREC_NEG)
        else:
            left = _render(node.left, prec)
            right = _render(node.right, prec + 1)
        text = f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"
        return f"({text})" if parent_prec > prec else text
    raise TypeError(f"not an expression node: {node!r}")


# --- evaluation -------------------------------------------------------------


def _eval(node, points: np.ndarray):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return points[:, node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, points)
    if isinstance(node, BinOp):
        a = _eval(node.left, points)
        b = _eval(node.right, points)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    if isinstance(node, Call):
        return _FUNCTIONS[node.name](*(_eval(a, points) for a in node.args))
    raise TypeError(f"not an expression node: {node!r}")


class ExpressionFunction(BlackBoxFunction):
    """Black-box function backed by a parsed expression tree.

    Singular operations (log or sqrt of a nonpositive argument, division by
    zero) surface as numeric errors naming the offending point, via the
    finiteness check in the base class.
    """

    def __init__(self, text: str, dimension: int, domain=None):
        super().__init__(dimension, f"expr:{text}", domain=domain)
        self.text = text
        self.ast = parse_expression(text, dimension)

    def _raw(self, points: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            values = _eval(self.ast, points)
        return np.broadcast_to(np.asarray(values, dtype=float), (points.shape[0],))
