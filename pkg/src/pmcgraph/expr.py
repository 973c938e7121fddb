"""Expression language for graph components.

Grammar (whitespace-insensitive, identifiers case-sensitive)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := ["-"] power
    power  := atom ["^" exponent]
    atom   := number | ident | ident "(" expr ")" | "(" expr ")"
    ident  := "x" digit+ | function-name | "pi" | "e"

The exponent of ``^`` must be constant: a number (optionally negated) or a
parenthesised expression without variables. Powers with variable exponents
have to be written through ``exp``/``ln`` explicitly and are rejected.
"""

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jets
from .errors import (DomainError, NonConstantExponentError, ParseError,
                     UnknownIdentifierError, VariableRangeError)
from .jets import Jet

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "sinh", "cosh", "tanh")
CONSTANTS = {"pi": math.pi, "e": math.e}


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
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


Node = Union[Const, Var, Neg, Binary, Call]


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), pos))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


def _byte_offset(text, pos):
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None, cls=ParseError):
        tok = tok or self.peek()
        raise cls(msg, _byte_offset(self.text, tok[2]))

    def expect(self, value):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == value:
            return self.advance()
        found = "end of input" if tok[0] == "end" else repr(tok[1])
        self.fail(f"syntax error: expected {value!r}, found {found}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"syntax error: unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Neg(self.power())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            start = self.peek()
            expo = self.exponent()
            if _has_variables(expo):
                self.fail("non-constant exponent", start, NonConstantExponentError)
            return Binary("^", base, expo)
        return base

    def exponent(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.exponent_atom())
        return self.exponent_atom()

    def exponent_atom(self):
        tok = self.peek()
        if tok[0] == "num":
            self.advance()
            return Const(float(tok[1]))
        if tok[0] == "op" and tok[1] == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok[0] == "ident":
            # reported as a non-constant exponent when it is a variable
            return self.atom()
        self.fail(self._unexpected(tok))

    def _unexpected(self, tok):
        if tok[0] == "end":
            return "syntax error: unexpected end of input"
        return f"syntax error: unexpected {tok[1]!r}"

    def atom(self):
        tok = self.peek()
        kind, val, _ = tok
        if kind == "num":
            self.advance()
            return Const(float(val))
        if kind == "op" and val == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            self.advance()
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in CONSTANTS:
                return Const(CONSTANTS[val])
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.n:
                    self.fail(f"variable {val} out of range 1..{self.n}", tok, VariableRangeError)
                return Var(idx)
            self.fail(f"unknown identifier {val!r}", tok, UnknownIdentifierError)
        self.fail(self._unexpected(tok))


def _has_variables(node):
    if isinstance(node, Var):
        return True
    if isinstance(node, Const):
        return False
    if isinstance(node, (Neg, Call)):
        return _has_variables(node.arg)
    return _has_variables(node.left) or _has_variables(node.right)


def parse(text, n):
    """Parse ``text`` into an expression tree over variables ``x1..xn``."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("syntax error: empty expression", 0)
    return _Parser(text, n).parse()


def _number(v):
    v = float(v)
    if v < 0 or math.copysign(1.0, v) < 0:
        return f"(-{-v!r})"
    return repr(v)


def pretty(node):
    """Fully parenthesised text; parsing it back is a fixed point of ``parse``."""
    if isinstance(node, Const):
        return _number(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{pretty(node.arg)})"
    if isinstance(node, Call):
        return f"{node.name}({pretty(node.arg)})"
    if node.op == "^":
        r = node.right
        expo = _number(r.value) if isinstance(r, Const) else f"({pretty(r)})"
        return f"({pretty(node.left)} ^ {expo})"
    return f"({pretty(node.left)} {node.op} {pretty(node.right)})"


def max_variable(node):
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return 0
    if isinstance(node, (Neg, Call)):
        return max_variable(node.arg)
    return max(max_variable(node.left), max_variable(node.right))


def constant_value(node):
    """Numeric value of a variable-free subtree."""
    return float(evaluate(node, np.zeros(max(max_variable(node), 1))))


# -- evaluation --------------------------------------------------------------

_NUMPY_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "ln": np.log, "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
}


def _domain_fail(node, x, detail):
    pts = np.asarray(x)
    where = pts.tolist() if pts.ndim == 1 else f"{pts.shape[0]} points"
    raise DomainError(f"domain error in {pretty(node)} at x={where}: {detail}")


def evaluate(node, x):
    """Plain floating-point value at ``x`` (shape ``(..., n)``)."""
    x = np.asarray(x, dtype=np.float64)

    def ev(nd):
        if isinstance(nd, Const):
            return np.full(x.shape[:-1], nd.value)
        if isinstance(nd, Var):
            return x[..., nd.index - 1]
        if isinstance(nd, Neg):
            return -ev(nd.arg)
        if isinstance(nd, Call):
            a = ev(nd.arg)
            if nd.name == "ln" and np.any(a <= 0):
                _domain_fail(nd, x, "logarithm of a nonpositive value")
            if nd.name == "sqrt" and np.any(a < 0):
                _domain_fail(nd, x, "square root of a negative value")
            return _NUMPY_FUNCS[nd.name](a)
        a = ev(nd.left)
        if nd.op == "^":
            p = constant_value(nd.right)
            if p != int(p) and np.any(a < 0):
                _domain_fail(nd, x, "non-integer power of a negative value")
            if p < 0 and np.any(a == 0):
                _domain_fail(nd, x, "negative power of zero")
            return a ** p
        b = ev(nd.right)
        if nd.op == "+":
            return a + b
        if nd.op == "-":
            return a - b
        if nd.op == "*":
            return a * b
        if np.any(b == 0):
            _domain_fail(nd, x, "division by zero")
        return a / b

    return ev(node)


def eval_jet(node, x, order):
    """Taylor jet of the expression at ``x`` up to total degree ``order``.

    ``x`` may carry leading batch axes; the result has lead shape
    ``x.shape[:-1]``. Results are exact up to roundoff.
    """
    x = np.asarray(x, dtype=np.float64)
    if order > jets.MAX_ORDER:
        raise ValueError(f"order {order} exceeds {jets.MAX_ORDER}")
    n = x.shape[-1]
    if max_variable(node) > n:
        raise DomainError(f"expression uses x{max_variable(node)} but the point has {n} coordinates")
    coords = Jet.variables(x, order)

    def ev(nd):
        if isinstance(nd, Const):
            return Jet.constant(np.full(x.shape[:-1], nd.value), n, order)
        if isinstance(nd, Var):
            return coords[..., nd.index - 1]
        if isinstance(nd, Neg):
            return -ev(nd.arg)
        try:
            if isinstance(nd, Call):
                return jets.ELEMENTARY[nd.name](ev(nd.arg))
            a = ev(nd.left)
            if nd.op == "^":
                return jets.power(a, constant_value(nd.right))
            b = ev(nd.right)
            if nd.op == "+":
                return a + b
            if nd.op == "-":
                return a - b
            if nd.op == "*":
                return a * b
            return a / b
        except DomainError as err:
            if str(err).startswith("domain error in"):
                raise
            _domain_fail(nd, x, str(err))

    return ev(node)


def substitute_scaled(node, lam):
    """Tree of ``lam * f(x / lam)``."""
    lam = float(lam)

    def sub(nd):
        if isinstance(nd, Var):
            return Binary("/", nd, Const(lam))
        if isinstance(nd, Const):
            return nd
        if isinstance(nd, Neg):
            return Neg(sub(nd.arg))
        if isinstance(nd, Call):
            return Call(nd.name, sub(nd.arg))
        if nd.op == "^":
            return Binary("^", sub(nd.left), nd.right)
        return Binary(nd.op, sub(nd.left), sub(nd.right))

    return Binary("*", Const(lam), sub(node))
