"""A small arithmetic grammar for diffusion coefficients given in configs.

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | 'pi' | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of ``exp``, ``expm1``, ``sin``, ``cos``, ``sqrt``.  ``^`` is
right-associative and binds tighter than unary minus, so ``-x^2`` is
``-(x^2)``.  Expressions are parsed into a tree and emitted as Python
source, once against ``numpy`` for vectorized evaluation and once against
``math`` for a compiled simulation kernel.
"""

import math
import re
from dataclasses import dataclass
from typing import Tuple, Union

import numba
import numpy as np

from .diffusion import DiffusionSpec, SimKernel
from .errors import ValidationError

FUNCTIONS = ("exp", "expm1", "sin", "cos", "sqrt")
_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Call, Neg, BinOp]


def tokenize(text):
    """Split ``text`` into ``(kind, value, position)`` triples."""
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ValidationError(f"cannot tokenize {text[pos:]!r}")
        num, name, sym = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            out.append(("num", float(num), start))
        elif name is not None:
            out.append(("name", name, start))
        elif sym in "+-*/^()":
            out.append(("op", sym, start))
        else:
            raise ValidationError(f"unexpected character {sym!r} at position {start} in {text!r}")
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, what):
        kind, value, pos = self.peek()
        got = "end of input" if kind == "end" else repr(value)
        raise ValidationError(f"expected {what} at position {pos} in {self.text!r}, got {got}")

    def expect(self, sym):
        if self.peek()[:2] != ("op", sym):
            self.fail(repr(sym))
        self.take()

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, value, _ = self.peek()
        if kind == "num":
            self.take()
            return Num(value)
        if kind == "name":
            if value == "x":
                self.take()
                return Var()
            if value == "pi":
                self.take()
                return Num(math.pi)
            if value in FUNCTIONS:
                self.take()
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            raise ValidationError(f"unknown name {value!r} in {self.text!r}")
        if (kind, value) == ("op", "("):
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("a number, 'x', a function or '('")


def parse(text: str) -> Node:
    """Parse ``text`` into an expression tree."""
    if not isinstance(text, str) or not text.strip():
        raise ValidationError("expression must be a non-empty string")
    p = _Parser(text)
    node = p.expr()
    if p.peek()[0] != "end":
        p.fail("an operator or end of input")
    return node


def to_source(node: Node, lib: str = "np", var: str = "x") -> str:
    """Python source for ``node`` with functions taken from module ``lib``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return var
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg, lib, var)})"
    if isinstance(node, Call):
        return f"{lib}.{node.fn}({to_source(node.arg, lib, var)})"
    op = "**" if node.op == "^" else node.op
    return f"({to_source(node.left, lib, var)} {op} {to_source(node.right, lib, var)})"


def compile_numpy(node: Node):
    """Vectorized ``f(x)`` returning a float array of the shape of ``x``."""
    src = to_source(node)
    fn = eval(f"lambda x: {src}", {"__builtins__": {}, "np": np})
    def f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape) + 0.0

    f.source = src
    return f


def _kernel(drift: Node, diffusion: Node):
    b = to_source(drift, "math", "r")
    s = to_source(diffusion, "math", "r")
    src = (
        "def coef(r, p):\n"
        f"    return {b}, {s}\n"
        "def logcoef(y, p):\n"
        "    r = math.exp(y)\n"
        f"    bb = {b}\n"
        f"    ss = {s}\n"
        "    return bb / r - 0.5 * (ss / r) ** 2, ss / r\n"
    )
    ns = {"math": math}
    exec(src, ns)
    return numba.njit(nogil=True)(ns["coef"]), numba.njit(nogil=True)(ns["logcoef"])


@dataclass(frozen=True)
class ExpressionDiffusion:
    """A diffusion ``dr = b dt + sigma dW`` on ``(0, R)`` from two expressions in ``x``."""

    drift: str
    diffusion: str
    R: float = math.inf
    reference: Union[float, None] = None

    def parsed(self) -> Tuple[Node, Node]:
        return parse(self.drift), parse(self.diffusion)

    def spec(self, label="") -> DiffusionSpec:
        """The :class:`DiffusionSpec`; the reference defaults to ``R/2`` or 1.

        The log-coordinate kernel is ``b/r - sigma^2/(2 r^2)`` and ``sigma/r``
        evaluated at ``r = e^y``.
        """
        b, s = self.parsed()
        R = float(self.R)
        ref = self.reference
        if ref is None:
            ref = R / 2 if math.isfinite(R) else 1.0
        coef, logcoef = _kernel(b, s)
        label = label or f"b={self.drift}; sigma={self.diffusion}"
        return DiffusionSpec(R, compile_numpy(b), compile_numpy(s), float(ref), label=label,
                             kernel=SimKernel(coef, logcoef, np.zeros(1)))
