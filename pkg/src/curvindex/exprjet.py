"""Component expressions and forward-mode jet arithmetic.

Metric, connection and scalar-field components are written as small
arithmetic expressions over the chart coordinates.  ``parse`` turns the text
into an immutable AST and ``eval_jet`` evaluates it as a truncated
multivariate Taylor expansion (a *jet*) of order at most 3.

Jet convention
--------------
A jet stores **partial-derivative values**, not Taylor coefficients: the
entry for the multi-index ``alpha`` is ``d^|alpha| f / dx^alpha`` at the
base point.  Mixed partials are stored once per exponent vector.  Entries
are ordered by total degree and then lexicographically, so the jet of
order ``k`` is a prefix of the jet of order ``k + 1``.

Jets may carry trailing batch axes: ``values`` has shape ``(M, *batch)``
where ``M`` is the number of multi-indices.  Evaluating at a point array of
shape ``(n, *batch)`` evaluates every point in one pass.

Grammar::

    expr    := sum
    sum     := product (("+" | "-") product)*
    product := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?          (right associative)
    atom    := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

``NAME`` is a declared coordinate, ``pi``, ``e`` or one of the functions
sin cos tan sinh cosh tanh exp log sqrt.  ``-x^2`` parses as ``-(x^2)``.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

MAX_ORDER = 3
FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt")
CONSTANTS = {"pi": math.pi, "e": math.e}
MAX_INT_POWER = 8


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class ArityError(ExprError):
    def __init__(self, func: str, nargs: int, offset: int):
        super().__init__(f"{func} takes exactly one argument, got {nargs} at offset {offset}")
        self.func = func
        self.offset = offset


class JetDomainError(ExprError, ArithmeticError):
    """Raised when a node is evaluated outside its domain."""

    def __init__(self, message: str, node: "Node"):
        super().__init__(f"{message} in {to_string(node)}")
        self.node = node


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Num | Var | Const | Neg | BinOp | Call


def to_string(node: Node) -> str:
    """Fully parenthesised text that parses back to an identical AST."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_string(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_string(node.left)}{node.op}{to_string(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def iter_nodes(node: Node):
    yield node
    if isinstance(node, (Neg, Call)):
        yield from iter_nodes(node.arg)
    elif isinstance(node, BinOp):
        yield from iter_nodes(node.left)
        yield from iter_nodes(node.right)


def remap_coords(node: Node, index_map: dict[int, int], names: Sequence[str]) -> Node:
    """Rewrite coordinate references through ``index_map`` (used by products)."""
    if isinstance(node, Var):
        new = index_map[node.index]
        return Var(new, names[new])
    if isinstance(node, Neg):
        return Neg(remap_coords(node.arg, index_map, names))
    if isinstance(node, Call):
        return Call(node.func, remap_coords(node.arg, index_map, names))
    if isinstance(node, BinOp):
        return BinOp(node.op, remap_coords(node.left, index_map, names),
                     remap_coords(node.right, index_map, names))
    return node


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            pos = len(source)
            break
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(source)))
    return toks


# binding powers
_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    def __init__(self, source: str, coords: Sequence[str]):
        self.toks = _tokenize(source)
        self.pos = 0
        self.coords = {name: i for i, name in enumerate(coords)}

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind != "op":
            what = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", tok.offset)
        return self.advance()

    def expression(self, rbp: int = 0) -> Node:
        left = self.nud(self.advance())
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _BP or _BP[tok.text] <= rbp:
                break
            self.advance()
            if tok.text == "^":
                # right associative; unary minus allowed in the exponent
                right = self.expression(_BP["^"] - 1) if self.peek().text != "-" else self.nud(self.advance())
                left = BinOp("^", left, right)
            else:
                left = BinOp(tok.text, left, self.expression(_BP[tok.text]))
        return left

    def nud(self, tok: _Tok) -> Node:
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            if self.peek().kind == "op" and self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifierError(tok.text, tok.offset)
                self.advance()
                arg = self.expression()
                nargs = 1
                while self.peek().kind == "op" and self.peek().text == ",":
                    self.advance()
                    self.expression()
                    nargs += 1
                self.expect(")")
                if nargs != 1:
                    raise ArityError(tok.text, nargs, tok.offset)
                return Call(tok.text, arg)
            if tok.text in self.coords:
                return Var(self.coords[tok.text], tok.text)
            if tok.text in CONSTANTS:
                return Const(tok.text)
            if tok.text in FUNCTIONS:
                raise ArityError(tok.text, 0, tok.offset)
            raise UnknownIdentifierError(tok.text, tok.offset)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {what}", tok.offset)


def parse(source: str, coords: Sequence[str]) -> Node:
    """Parse ``source`` into an AST over the ordered coordinate names."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    coords = list(coords)
    if not coords or len(set(coords)) != len(coords):
        raise ExprError("coordinate names must be non-empty and pairwise distinct")
    clash = [c for c in coords if c in FUNCTIONS or c in CONSTANTS]
    if clash:
        raise ExprError(f"coordinate names shadow built-ins: {clash}")
    p = _Parser(source, coords)
    node = p.expression()
    tok = p.peek()
    if tok.kind != "end":
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)
    return node


# ---------------------------------------------------------------------------
# Jet algebra


class JetAlgebra:
    """Multi-index bookkeeping for jets in ``n`` variables up to ``order``.

    ``mul`` implements the general Leibniz rule on partial-derivative
    values; ``einsum`` does the same for arrays whose trailing axes are
    tensor slots.  Leading axis is always the multi-index axis.
    """

    def __init__(self, n: int, order: int):
        if n < 1:
            raise ValueError("jet dimension must be positive")
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}")
        self.n = n
        self.order = order
        mons = []
        for deg in range(order + 1):
            layer = [a for a in itertools.product(range(deg + 1), repeat=n) if sum(a) == deg]
            mons.extend(sorted(layer, reverse=True))
        self.monomials: list[tuple[int, ...]] = mons
        self.index = {m: i for i, m in enumerate(mons)}
        self.size = len(mons)
        self.degree = np.array([sum(m) for m in mons])
        self.factorial = np.array([math.prod(math.factorial(k) for k in m) for m in mons], dtype=float)

        ia, ib, ig, w = [], [], [], []
        for g, gm in enumerate(mons):
            for am in itertools.product(*(range(k + 1) for k in gm)):
                bm = tuple(x - y for x, y in zip(gm, am))
                ia.append(self.index[am])
                ib.append(self.index[bm])
                ig.append(g)
                w.append(math.prod(math.comb(x, y) for x, y in zip(gm, am)))
        self._ia = np.array(ia)
        self._ib = np.array(ib)
        weights = np.zeros((self.size, len(ia)))
        weights[ig, np.arange(len(ia))] = w
        self._weights = weights

        # shift tables for differentiation: entry beta of d_a f is entry beta+e_a of f
        self._shift = []
        if order > 0:
            lower = mons[: self.lower_size]
            for a in range(n):
                self._shift.append(np.array(
                    [self.index[tuple(m + (1 if i == a else 0) for i, m in enumerate(b))] for b in lower]))

    @property
    def lower_size(self) -> int:
        return int(np.sum(self.degree <= self.order - 1))

    def variable(self, a: int, value) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        out = np.zeros((self.size,) + value.shape)
        out[0] = value
        if self.order > 0:
            out[1 + a] = 1.0
        return out

    def constant(self, value, batch_shape=()) -> np.ndarray:
        out = np.zeros((self.size,) + tuple(batch_shape))
        out[0] = value
        return out

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = a[self._ia] * b[self._ib]
        return np.tensordot(self._weights, prod, axes=1)

    def einsum(self, spec: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Jet product contracted over tensor slots, e.g. ``'ij,jk->ik'``.

        Operands have shape ``(M, *batch, *slots)``.
        """
        ins, out = spec.split("->")
        sa, sb = ins.split(",")
        full = f"p...{sa},p...{sb}->p...{out}"
        prod = np.einsum(full, a[self._ia], b[self._ib], optimize=True)
        return np.tensordot(self._weights, prod, axes=1)

    def deriv(self, a: np.ndarray, axis: int) -> np.ndarray:
        """Partial derivative along coordinate ``axis``; result has order-1 entries."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        return a[self._shift[axis]]

    def compose(self, a: np.ndarray, derivs: Sequence[np.ndarray]) -> np.ndarray:
        """Jet of ``f(a)`` given ``f, f', f'', ...`` evaluated at ``a``'s value."""
        h = a.copy()
        h[0] = 0.0
        out = np.zeros_like(a)
        out[0] = derivs[0]
        power = None
        for k in range(1, self.order + 1):
            power = h if power is None else self.mul(power, h)
            out = out + power * (np.asarray(derivs[k]) / math.factorial(k))
        return out


@lru_cache(maxsize=None)
def algebra(n: int, order: int) -> JetAlgebra:
    return JetAlgebra(n, order)


def order_of_size(n: int, size: int) -> int:
    for k in range(MAX_ORDER + 1):
        if algebra(n, k).size == size:
            return k
    raise ValueError(f"{size} is not a jet size for n={n}")


@dataclass(frozen=True, eq=False)
class Jet:
    """Truncated Taylor expansion stored as partial-derivative values."""

    n: int
    order: int
    values: np.ndarray

    @property
    def algebra(self) -> JetAlgebra:
        return algebra(self.n, self.order)

    @property
    def value(self):
        return self.values[0]

    def partial(self, *axes: int):
        """Partial derivative along the listed coordinate axes, e.g. ``partial(0, 1)``."""
        if len(axes) > self.order:
            raise ValueError(f"order-{self.order} jet has no derivative of order {len(axes)}")
        mi = [0] * self.n
        for a in axes:
            mi[a] += 1
        return self.values[self.algebra.index[tuple(mi)]]

    def coefficients(self) -> dict[tuple[int, ...], float]:
        return {m: self.values[i] for i, m in enumerate(self.algebra.monomials)}

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if (other.n, other.order) != (self.n, self.order):
                raise ValueError("jets must share dimension and order")
            return other
        return Jet(self.n, self.order, self.algebra.constant(other, self.values.shape[1:]))

    def __add__(self, other):
        return Jet(self.n, self.order, self.values + self._coerce(other).values)

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.n, self.order, self.values - self._coerce(other).values)

    def __rsub__(self, other):
        return Jet(self.n, self.order, self._coerce(other).values - self.values)

    def __neg__(self):
        return Jet(self.n, self.order, -self.values)

    def __mul__(self, other):
        return Jet(self.n, self.order, self.algebra.mul(self.values, self._coerce(other).values))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        return self * other.reciprocal()

    def reciprocal(self) -> "Jet":
        v = self.values[0]
        if np.any(v == 0):
            raise ZeroDivisionError("jet reciprocal of zero value")
        d = [1 / v, -1 / v**2, 2 / v**3, -6 / v**4]
        return Jet(self.n, self.order, self.algebra.compose(self.values, d))

    def apply(self, func: str) -> "Jet":
        return Jet(self.n, self.order, self.algebra.compose(self.values, _derivative_list(func, self.values[0])))


def _derivative_list(func: str, v):
    """``[f(v), f'(v), f''(v), f'''(v)]`` for the supported functions."""
    if func == "sin":
        s, c = np.sin(v), np.cos(v)
        return [s, c, -s, -c]
    if func == "cos":
        s, c = np.sin(v), np.cos(v)
        return [c, -s, -c, s]
    if func == "tan":
        t = np.tan(v)
        sec2 = 1 + t * t
        return [t, sec2, 2 * t * sec2, sec2 * (2 + 6 * t * t)]
    if func == "sinh":
        s, c = np.sinh(v), np.cosh(v)
        return [s, c, s, c]
    if func == "cosh":
        s, c = np.sinh(v), np.cosh(v)
        return [c, s, c, s]
    if func == "tanh":
        t = np.tanh(v)
        sech2 = 1 - t * t
        return [t, sech2, -2 * t * sech2, sech2 * (6 * t * t - 2)]
    if func == "exp":
        e = np.exp(v)
        return [e, e, e, e]
    if func == "log":
        return [np.log(v), 1 / v, -1 / v**2, 2 / v**3]
    if func == "sqrt":
        s = np.sqrt(v)
        return [s, 0.5 / s, -0.25 / s**3, 0.375 / s**5]
    raise ValueError(f"unknown function {func}")


def _int_exponent(node: Node) -> int | None:
    sign = 1
    while isinstance(node, Neg):
        sign = -sign
        node = node.arg
    if isinstance(node, Num) and float(node.value).is_integer() and abs(node.value) <= MAX_INT_POWER:
        return sign * int(node.value)
    return None


def _int_power(base: Jet, k: int) -> Jet:
    if k == 0:
        return base._coerce(1.0)
    out = base
    for _ in range(abs(k) - 1):
        out = out * base
    return out.reciprocal() if k < 0 else out


def eval_jet(ast: Node, point, order: int) -> Jet:
    """Evaluate ``ast`` at ``point`` as a jet of the given order.

    ``point`` has shape ``(n,)`` or ``(n, *batch)``.
    """
    point = np.asarray(point, dtype=float)
    if point.ndim == 0:
        point = point.reshape(1)
    n = point.shape[0]
    alg = algebra(n, order)
    batch = point.shape[1:]
    for node in iter_nodes(ast):
        if isinstance(node, Var) and node.index >= n:
            raise ValueError(f"coordinate {node.name} (index {node.index}) outside point of dimension {n}")

    def ev(node: Node) -> Jet:
        if isinstance(node, Num):
            return Jet(n, order, alg.constant(node.value, batch))
        if isinstance(node, Const):
            return Jet(n, order, alg.constant(CONSTANTS[node.name], batch))
        if isinstance(node, Var):
            return Jet(n, order, alg.variable(node.index, point[node.index]))
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Call):
            arg = ev(node.arg)
            v = arg.value
            if node.func == "log" and np.any(v <= 0):
                raise JetDomainError("log of non-positive value", node)
            if node.func == "sqrt" and (np.any(v < 0) or (order > 0 and np.any(v == 0))):
                raise JetDomainError("sqrt of negative value" if np.any(v < 0) else "sqrt not differentiable at 0", node)
            return arg.apply(node.func)
        if isinstance(node, BinOp):
            left = ev(node.left)
            if node.op == "^":
                k = _int_exponent(node.right)
                if k is not None:
                    if k < 0 and np.any(left.value == 0):
                        raise JetDomainError("division by zero", node)
                    return _int_power(left, k)
                right = ev(node.right)
                if np.any(left.value <= 0):
                    raise JetDomainError("non-integer power of non-positive value", node)
                return (right * left.apply("log")).apply("exp")
            right = ev(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if node.op == "/":
                if np.any(right.value == 0):
                    raise JetDomainError("division by zero", node)
                return left / right
        raise TypeError(f"not an expression node: {node!r}")

    return ev(ast)


def evaluate(ast: Node, point) -> float:
    """Plain float evaluation with the ``math`` module (no jets).

    Kept independent of the jet code so it can serve as a finite-difference
    oracle.
    """
    x = [float(v) for v in point]
    funcs: dict[str, Callable[[float], float]] = {
        name: getattr(math, name) for name in FUNCTIONS
    }

    def ev(node: Node) -> float:
        if isinstance(node, Num):
            return float(node.value)
        if isinstance(node, Const):
            return CONSTANTS[node.name]
        if isinstance(node, Var):
            return x[node.index]
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Call):
            try:
                return funcs[node.func](ev(node.arg))
            except ValueError as exc:
                raise JetDomainError(str(exc), node) from None
        if isinstance(node, BinOp):
            a, b = ev(node.left), ev(node.right)
            try:
                if node.op == "+":
                    return a + b
                if node.op == "-":
                    return a - b
                if node.op == "*":
                    return a * b
                if node.op == "/":
                    return a / b
                return a ** b
            except ZeroDivisionError:
                raise JetDomainError("division by zero", node) from None
        raise TypeError(f"not an expression node: {node!r}")

    return ev(ast)
