"""Arithmetic expressions for nonlinear restriction maps.

Grammar (lowest to highest precedence, all binary operators left
associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' ['-'] INTEGER)*
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := 'sin' | 'cos' | 'exp'

Integer literals become exact rationals; literals with a decimal point or
exponent become floats.  Evaluation is generic over Python numbers, so a
rational point fed through a polynomial stays exact.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    DivideByZero,
    DomainError,
    ExprSyntaxError,
    UnknownFunction,
    UnknownVariable,
)

DEFAULT_SEED = 0x5EAF
PROBE_COUNT = 16
FUNCTIONS = ("sin", "cos", "exp")


def seed_from_env(default: int = DEFAULT_SEED) -> int:
    raw = os.environ.get("SHEAFKIT_SEED")
    if not raw:
        return default
    return int(raw, 0)


# AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Union[Fraction, float]


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # neg | sin | cos | exp
    child: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Unary, Binary]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            raise ExprSyntaxError(f"expected {value!r}", pos)

    def parse(self) -> Node:
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        while self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", pos)
            node = Binary("^", node, Const(Fraction(sign * int(val))))
        return node

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(Fraction(int(val)) if val.isdigit() else float(val))
        if kind == "name":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {val!r} at position {pos}")
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} needs an argument", pos)
            return Var(val)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected {val!r}", pos)


def parse(text: str) -> Node:
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


# printing ----------------------------------------------------------------

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _level(n: Node) -> int:
    if isinstance(n, Binary):
        return _LEVEL[n.op]
    if isinstance(n, Unary) and n.op == "neg":
        return 3
    if isinstance(n, Const):
        c = _canonical_const(n)
        return 5 if c is n else _level(c)
    return 5


def _const_text(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    return repr(float(v))


def _canonical_const(n: Const) -> Node:
    """Negative and fractional constants print as the trees the parser builds."""
    v = n.value
    if v < 0 or (isinstance(v, float) and math.copysign(1.0, v) < 0):
        return Unary("neg", Const(-v))
    if isinstance(v, Fraction) and v.denominator != 1:
        return Binary("/", Const(Fraction(v.numerator)), Const(Fraction(v.denominator)))
    return n


def to_text(n: Node) -> str:
    """Render with the minimal parentheses that re-parse to the same tree.

    Trees straight from :func:`parse` round-trip exactly; other trees print
    to text whose re-parse prints identically.
    """
    if isinstance(n, Const):
        c = _canonical_const(n)
        return _const_text(n.value) if c is n else to_text(c)
    if isinstance(n, Var):
        return n.name
    if isinstance(n, Unary):
        if n.op != "neg":
            return f"{n.op}({to_text(n.child)})"
        inner = to_text(n.child)
        return "-" + (f"({inner})" if _level(n.child) < 3 else inner)
    if n.op == "^":
        base = to_text(n.left)
        if _level(n.left) < 4:
            base = f"({base})"
        return f"{base}^{int(n.right.value)}"
    lvl = _LEVEL[n.op]
    left = to_text(n.left)
    right = to_text(n.right)
    if _level(n.left) < lvl:
        left = f"({left})"
    if _level(n.right) <= lvl:
        right = f"({right})"
    sep = f" {n.op} " if lvl == 1 else n.op
    return f"{left}{sep}{right}"


def variables(n: Node) -> set[str]:
    if isinstance(n, Var):
        return {n.name}
    if isinstance(n, Const):
        return set()
    if isinstance(n, Unary):
        return variables(n.child)
    return variables(n.left) | variables(n.right)


# evaluation ------------------------------------------------------------

def eval_node(n: Node, env: Mapping[str, object]):
    """Evaluate over whatever numbers ``env`` holds (Fractions stay exact)."""
    if isinstance(n, Const):
        return n.value
    if isinstance(n, Var):
        try:
            return env[n.name]
        except KeyError:
            raise UnknownVariable(f"no value for variable {n.name!r}") from None
    if isinstance(n, Unary):
        x = eval_node(n.child, env)
        if n.op == "neg":
            return -x
        try:
            return {"sin": math.sin, "cos": math.cos, "exp": math.exp}[n.op](float(x))
        except OverflowError:
            raise DomainError(f"{n.op} overflows at {x!r}") from None
    a = eval_node(n.left, env)
    if n.op == "^":
        k = int(n.right.value)
        if a == 0 and k < 0:
            raise DivideByZero("zero raised to a negative power")
        try:
            return a**k
        except OverflowError:
            raise DomainError("power overflows") from None
    b = eval_node(n.right, env)
    if n.op == "+":
        return a + b
    if n.op == "-":
        return a - b
    if n.op == "*":
        return a * b
    if b == 0:
        raise DivideByZero(f"division by zero in {to_text(n)}")
    return a / b


# differentiation ---------------------------------------------------------

ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def _is_const(n: Node, value=None) -> bool:
    return isinstance(n, Const) and (value is None or n.value == value)


def _add(a: Node, b: Node) -> Node:
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Binary("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(a, 0):
        return _neg(b)
    return Binary("-", a, b)


def _mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return Binary("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if _is_const(a, 0):
        return ZERO
    if _is_const(b, 1):
        return a
    return Binary("/", a, b)


def _neg(a: Node) -> Node:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.child
    return Unary("neg", a)


def _pow(a: Node, k: int) -> Node:
    if k == 0:
        return ONE
    if k == 1:
        return a
    return Binary("^", a, Const(Fraction(k)))


def partial(n: Node, var: str, declared: Sequence[str] | None = None) -> Node:
    """Symbolic derivative of ``n`` with respect to ``var``."""
    if declared is not None and var not in declared:
        raise UnknownVariable(f"{var!r} is not a declared input")
    return _d(n, var)


def _d(n: Node, v: str) -> Node:
    if isinstance(n, Const):
        return ZERO
    if isinstance(n, Var):
        return ONE if n.name == v else ZERO
    if isinstance(n, Unary):
        du = _d(n.child, v)
        if _is_const(du, 0):
            return ZERO
        if n.op == "neg":
            return _neg(du)
        if n.op == "sin":
            return _mul(Unary("cos", n.child), du)
        if n.op == "cos":
            return _mul(_neg(Unary("sin", n.child)), du)
        return _mul(Unary("exp", n.child), du)
    a, b = n.left, n.right
    if n.op == "^":
        k = int(b.value)
        da = _d(a, v)
        return _mul(_mul(Const(Fraction(k)), _pow(a, k - 1)), da)
    da, db = _d(a, v), _d(b, v)
    if n.op == "+":
        return _add(da, db)
    if n.op == "-":
        return _sub(da, db)
    if n.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    num = _sub(_mul(da, b), _mul(a, db))
    return _div(num, _pow(b, 2))


def substitute(n: Node, env: Mapping[str, Node]) -> Node:
    if isinstance(n, Var):
        return env.get(n.name, n)
    if isinstance(n, Const):
        return n
    if isinstance(n, Unary):
        return Unary(n.op, substitute(n.child, env))
    if n.op == "^":
        return Binary("^", substitute(n.left, env), n.right)
    return Binary(n.op, substitute(n.left, env), substitute(n.right, env))


# maps ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExprMap:
    """A vector-valued map given by one expression per output coordinate."""

    inputs: tuple[str, ...]
    outputs: tuple[Node, ...]

    def __post_init__(self):
        if len(set(self.inputs)) != len(self.inputs):
            raise UnknownVariable(f"duplicate inputs {self.inputs}")
        allowed = set(self.inputs)
        for out in self.outputs:
            extra = variables(out) - allowed
            if extra:
                raise UnknownVariable(f"undeclared variables {sorted(extra)}")

    @classmethod
    def from_strings(cls, inputs: Sequence[str], outputs: Sequence[str]) -> "ExprMap":
        return cls(tuple(inputs), tuple(parse(o) for o in outputs))

    @property
    def arity(self) -> tuple[int, int]:
        return len(self.inputs), len(self.outputs)

    def __call__(self, point: Sequence) -> tuple:
        return evaluate_exact(self, point)

    def jacobian_nodes(self) -> list[list[Node]]:
        return [[partial(o, v) for v in self.inputs] for o in self.outputs]

    def compose(self, inner: "ExprMap") -> "ExprMap":
        """``self ∘ inner``: feed inner's outputs into self's inputs."""
        if len(inner.outputs) != len(self.inputs):
            raise UnknownVariable("arity mismatch in expression composition")
        env = dict(zip(self.inputs, inner.outputs))
        return ExprMap(inner.inputs, tuple(substitute(o, env) for o in self.outputs))

    def substitute_values(self, values: Mapping[str, object]) -> "ExprMap":
        """Freeze some inputs to constants, dropping them from the input list."""
        env = {k: Const(v if isinstance(v, (Fraction, float)) else Fraction(v)) for k, v in values.items()}
        ins = tuple(v for v in self.inputs if v not in values)
        return ExprMap(ins, tuple(substitute(o, env) for o in self.outputs))

    def to_json(self) -> dict:
        return {"kind": "expr", "inputs": list(self.inputs), "outputs": [to_text(o) for o in self.outputs]}


def evaluate_exact(m: ExprMap, point: Sequence) -> tuple:
    if len(point) != len(m.inputs):
        raise UnknownVariable(f"point has {len(point)} coordinates, map takes {len(m.inputs)}")
    env = {k: _exactify(v) for k, v in zip(m.inputs, point)}
    return tuple(eval_node(o, env) for o in m.outputs)


def _exactify(v):
    return Fraction(v) if isinstance(v, int) and not isinstance(v, bool) else v


def evaluate(m: ExprMap, point: Sequence) -> tuple[float, ...]:
    """Componentwise float evaluation."""
    out = evaluate_exact(m, point)
    try:
        return tuple(float(v) for v in out)
    except OverflowError:
        raise DomainError("value does not fit in a float") from None


def jacobian(m: ExprMap, point: Sequence, mode: str = "symbolic", wrt: Sequence[str] | None = None) -> list[list]:
    """Jacobian rows (outputs) by columns (``wrt`` inputs, default all)."""
    wrt = list(m.inputs if wrt is None else wrt)
    for v in wrt:
        if v not in m.inputs:
            raise UnknownVariable(f"{v!r} is not an input")
    if mode == "symbolic":
        env = {k: _exactify(x) for k, x in zip(m.inputs, point)}
        return [[eval_node(partial(o, v), env) for v in wrt] for o in m.outputs]
    if mode in ("finite-diff", "fd"):
        base = [float(x) for x in point]
        cols = []
        for v in wrt:
            j = m.inputs.index(v)
            h = 1e-6 * (1 + abs(base[j]))
            up, dn = list(base), list(base)
            up[j] += h
            dn[j] -= h
            fu, fd = evaluate(m, up), evaluate(m, dn)
            cols.append([(a - b) / (2 * h) for a, b in zip(fu, fd)])
        return [[cols[c][r] for c in range(len(wrt))] for r in range(len(m.outputs))]
    raise ValueError(f"unknown differentiation mode {mode!r}")


def probe_points(dim: int, count: int = PROBE_COUNT, seed: int | None = None) -> list[tuple[float, ...]]:
    """Deterministic probe points with coordinates in [-2, 2]."""
    rng = np.random.default_rng(seed_from_env() if seed is None else seed)
    pts = rng.uniform(-2.0, 2.0, size=(count, dim))
    return [tuple(float(v) for v in row) for row in pts]
