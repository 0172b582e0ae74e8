"""Small infix expression language for scalar fields on R^d.

Grammar (lowest to highest binding)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | VAR | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Variables are ``x1`` .. ``xd``. The parser never produces negative literals;
``-3`` parses as ``Neg(Num(3.0))``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ExpressionSyntaxError

UNARY_FUNCS = ("abs", "sqrt", "exp", "log", "sin", "cos", "relu")
BINARY_FUNCS = ("max", "min")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expression = Union[Num, Var, Neg, BinOp, Call]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, dim):
        self.tokens = _tokenize(text)
        self.i = 0
        self.dim = dim

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text):
        if self.tok.text != text or self.tok.kind == "end":
            raise ExpressionSyntaxError(f"expected {text!r}", self.tok.pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "name":
            self.advance()
            m = re.fullmatch(r"x(\d+)", t.text)
            if m:
                index = int(m.group(1))
                if index < 1 or index > self.dim:
                    raise ExpressionSyntaxError(
                        f"variable {t.text} exceeds dimension {self.dim}", t.pos
                    )
                return Var(index)
            if t.text in UNARY_FUNCS or t.text in BINARY_FUNCS:
                return self.call(t)
            raise ExpressionSyntaxError(f"unknown name {t.text!r}", t.pos)
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ExpressionSyntaxError(f"unexpected {what}", t.pos)

    def call(self, name_tok):
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = 1 if name_tok.text in UNARY_FUNCS else 2
        if len(args) != arity:
            raise ExpressionSyntaxError(
                f"{name_tok.text} takes {arity} argument(s), got {len(args)}", name_tok.pos
            )
        return Call(name_tok.text, tuple(args))


def parse_expression(text: str, dim: int) -> Expression:
    """Parse ``text`` into an AST over variables ``x1..x{dim}``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(text, dim).parse()


# precedence levels used by the printer
_ADD, _MUL, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5
_BIN_PREC = {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}


def _fmt_num(value):
    if value < 0 or not np.isfinite(value):
        raise ValueError(f"literal {value!r} has no source form")
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def _render(node):
    """Return (text, precedence)."""
    if isinstance(node, Num):
        return _fmt_num(node.value), _ATOM
    if isinstance(node, Var):
        return f"x{node.index}", _ATOM
    if isinstance(node, Call):
        inner = ", ".join(_render(a)[0] for a in node.args)
        return f"{node.name}({inner})", _ATOM
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _UNARY), _UNARY
    if isinstance(node, BinOp):
        prec = _BIN_PREC[node.op]
        if node.op == "^":
            left, right = _wrap(node.left, _ATOM), _wrap(node.right, _UNARY)
            return f"{left}^{right}", prec
        left, right = _wrap(node.left, prec), _wrap(node.right, prec + 1)
        return f"{left} {node.op} {right}", prec
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node, min_prec):
    text, prec = _render(node)
    return f"({text})" if prec < min_prec else text


def format_expression(node: Expression) -> str:
    """Minimal-parenthesis source text; ``parse_expression`` inverts it."""
    return _render(node)[0]


def max_variable(node: Expression) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return 0
    if isinstance(node, Neg):
        return max_variable(node.operand)
    if isinstance(node, BinOp):
        return max(max_variable(node.left), max_variable(node.right))
    return max(max_variable(a) for a in node.args)


# Compiled form: X (n, d) -> (values (n,), ok (n,) bool). Rows with ok=False hit a
# non-total operation and carry garbage values.
Compiled = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"]


def _is_integer(b):
    return np.floor(b) == b


def compile_expression(node: Expression) -> Compiled:
    """Compile an AST into a batched numpy evaluator with a validity mask."""
    if isinstance(node, Num):
        value = node.value

        def f(X):
            n = X.shape[0]
            return np.full(n, value), np.ones(n, dtype=bool)

        return f
    if isinstance(node, Var):
        col = node.index - 1

        def f(X):
            return X[:, col].astype(float, copy=True), np.ones(X.shape[0], dtype=bool)

        return f
    if isinstance(node, Neg):
        g = compile_expression(node.operand)

        def f(X):
            v, ok = g(X)
            return -v, ok

        return f
    if isinstance(node, BinOp):
        lf, rf = compile_expression(node.left), compile_expression(node.right)
        op = node.op

        def f(X):
            a, oka = lf(X)
            b, okb = rf(X)
            ok = oka & okb
            with np.errstate(all="ignore"):
                if op == "+":
                    v = a + b
                elif op == "-":
                    v = a - b
                elif op == "*":
                    v = a * b
                elif op == "/":
                    ok &= b != 0
                    v = a / np.where(b != 0, b, 1.0)
                else:
                    ok &= ~((a < 0) & ~_is_integer(b))
                    ok &= ~((a == 0) & (b < 0))
                    v = np.power(a, b)
            return v, ok & np.isfinite(v)

        return f
    if isinstance(node, Call):
        parts = [compile_expression(a) for a in node.args]
        name = node.name

        def f(X):
            vals, oks = zip(*(p(X) for p in parts))
            ok = np.logical_and.reduce(oks)
            a = vals[0]
            with np.errstate(all="ignore"):
                if name == "abs":
                    v = np.abs(a)
                elif name == "sqrt":
                    ok = ok & (a >= 0)
                    v = np.sqrt(np.where(a >= 0, a, 0.0))
                elif name == "exp":
                    v = np.exp(a)
                elif name == "log":
                    ok = ok & (a > 0)
                    v = np.log(np.where(a > 0, a, 1.0))
                elif name == "sin":
                    v = np.sin(a)
                elif name == "cos":
                    v = np.cos(a)
                elif name == "relu":
                    v = np.maximum(a, 0.0)
                elif name == "max":
                    v = np.maximum(a, vals[1])
                else:
                    v = np.minimum(a, vals[1])
            return v, ok & np.isfinite(v)

        return f
    raise TypeError(f"not an expression node: {node!r}")
