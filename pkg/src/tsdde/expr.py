"""A small expression language for coefficients and delays.

One variable (``t``), two reserved constants (``e``, ``pi``), the usual
arithmetic, a handful of elementary functions and the scale-aware
primitives ``mu``, ``sigma``, ``rho``, ``rho2`` and ``scattered``.
Conditionals read ``if COND then X else Y``.

Evaluation is vectorised over numpy arrays of ``t``; the branches of a
conditional are only evaluated where they are selected, so domain errors in
an unused branch do not fire.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EvalError, ExprSyntaxError, HorizonExceeded, UnknownIdentifier

# -- AST ----------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    pos: tuple[int, int] = field(default=(1, 1), compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    pass


@dataclass(frozen=True)
class Const(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    operand: Node


@dataclass(frozen=True)
class Bin(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple[Node, ...]


@dataclass(frozen=True)
class Compare(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Logic(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Not(Node):
    operand: Node


@dataclass(frozen=True)
class If(Node):
    cond: Node
    then: Node
    other: Node


CONSTANTS = {"e": math.e, "pi": math.pi}
# name -> (min args, max args, returns a condition)
FUNCTIONS = {
    "exp": (1, 1, False),
    "ln": (1, 1, False),
    "sinh": (1, 1, False),
    "cosh": (1, 1, False),
    "sqrt": (1, 1, False),
    "abs": (1, 1, False),
    "min": (2, 99, False),
    "max": (2, 99, False),
    "floor": (1, 1, False),
    "frac": (1, 1, False),
    "mu": (1, 1, False),
    "sigma": (1, 1, False),
    "rho": (1, 1, False),
    "rho2": (1, 1, False),
    "scattered": (1, 1, True),
}
SCALE_FUNCTIONS = {"mu", "sigma", "rho", "rho2", "scattered"}
KEYWORDS = {"if", "then", "else", "and", "or", "not"}
CMP_OPS = {"<", "<=", ">", ">=", "==", "!="}

# -- lexer --------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|!=|[-+*/^(),<>])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, end
    text: str
    pos: tuple[int, int]


def _position(src: str, offset: int) -> tuple[int, int]:
    line = src.count("\n", 0, offset) + 1
    col = offset - (src.rfind("\n", 0, offset) + 1) + 1
    return line, col


def tokenize(src: str) -> list[Token]:
    out = []
    i = 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if not m:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", *_position(src, i))
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), _position(src, i)))
        i = m.end()
    out.append(Token("end", "", _position(src, len(src))))
    return out


# -- parser -------------------------------------------------------------


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "name") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", *self.tok.pos)
        return self.advance()

    def fail(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ExprSyntaxError(msg, *tok.pos)

    # expr := 'if' expr 'then' expr 'else' expr | or_expr
    def expr(self) -> Node:
        if self.at("if"):
            start = self.advance()
            cond = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            b = self.expr()
            return If(cond, a, b, pos=start.pos)
        return self.or_expr()

    def or_expr(self) -> Node:
        node = self.and_expr()
        while self.at("or"):
            tok = self.advance()
            node = Logic("or", node, self.and_expr(), pos=tok.pos)
        return node

    def and_expr(self) -> Node:
        node = self.not_expr()
        while self.at("and"):
            tok = self.advance()
            node = Logic("and", node, self.not_expr(), pos=tok.pos)
        return node

    def not_expr(self) -> Node:
        if self.at("not"):
            tok = self.advance()
            return Not(self.not_expr(), pos=tok.pos)
        return self.comparison()

    def comparison(self) -> Node:
        node = self.additive()
        if self.tok.kind == "op" and self.tok.text in CMP_OPS:
            tok = self.advance()
            node = Compare(tok.text, node, self.additive(), pos=tok.pos)
            if self.tok.kind == "op" and self.tok.text in CMP_OPS:
                self.fail("chained comparisons are not allowed")
        return node

    def additive(self) -> Node:
        node = self.term()
        while self.at("+") or self.at("-"):
            tok = self.advance()
            node = Bin(tok.text, node, self.term(), pos=tok.pos)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.at("*") or self.at("/"):
            tok = self.advance()
            node = Bin(tok.text, node, self.unary(), pos=tok.pos)
        return node

    def unary(self) -> Node:
        if self.at("-"):
            tok = self.advance()
            return Neg(self.unary(), pos=tok.pos)
        if self.at("+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.at("^"):
            tok = self.advance()
            return Bin("^", base, self.unary(), pos=tok.pos)
        return base

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), pos=tok.pos)
        if self.at("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if self.at("if"):
            return self.expr()
        if tok.kind == "name":
            if tok.text in KEYWORDS:
                self.fail(f"unexpected keyword {tok.text!r}")
            self.advance()
            if self.at("("):
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifier(f"unknown function {tok.text!r}", *tok.pos)
                self.advance()
                args = [self.expr()]
                while self.at(","):
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                lo, hi, _ = FUNCTIONS[tok.text]
                if not lo <= len(args) <= hi:
                    self.fail(f"{tok.text} takes {lo if lo == hi else f'{lo} or more'} argument(s)", tok)
                return Call(tok.text, tuple(args), pos=tok.pos)
            if tok.text == "t":
                return Var(pos=tok.pos)
            if tok.text in CONSTANTS:
                return Const(tok.text, pos=tok.pos)
            if tok.text in FUNCTIONS:
                self.fail(f"function {tok.text!r} needs arguments", tok)
            raise UnknownIdentifier(f"unknown identifier {tok.text!r}", *tok.pos)
        self.fail(f"unexpected {tok.text!r}" if tok.text else "unexpected end of input")


def _kind(node: Node) -> str:
    """Type-check the tree: returns 'num' or 'bool', raising on misuse."""

    def need(n: Node, want: str):
        k = _kind(n)
        if k != want:
            what = "a number" if want == "num" else "a condition"
            raise ExprSyntaxError(f"expected {what} here", *n.pos)

    match node:
        case Num() | Var() | Const():
            return "num"
        case Neg(operand=x):
            need(x, "num")
            return "num"
        case Bin(left=a, right=b):
            need(a, "num")
            need(b, "num")
            return "num"
        case Call(name=name, args=args):
            for a in args:
                need(a, "num")
            return "bool" if FUNCTIONS[name][2] else "num"
        case Compare(left=a, right=b):
            need(a, "num")
            need(b, "num")
            return "bool"
        case Logic(left=a, right=b):
            need(a, "bool")
            need(b, "bool")
            return "bool"
        case Not(operand=x):
            need(x, "bool")
            return "bool"
        case If(cond=c, then=a, other=b):
            need(c, "bool")
            need(a, "num")
            need(b, "num")
            return "num"
    raise TypeError(node)


def parse(src: str) -> "Expr":
    """Parse source text into an expression; errors carry line and column."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 1, 1)
    p = _Parser(src)
    node = p.expr()
    if p.tok.kind != "end":
        p.fail(f"unexpected {p.tok.text!r}")
    if _kind(node) != "num":
        raise ExprSyntaxError("a condition cannot be used as a value", *node.pos)
    return Expr(node)


# -- printer ------------------------------------------------------------

_LEVEL = {"or": 1, "and": 2, "+": 5, "-": 5, "*": 6, "/": 6, "^": 8}


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 or s.startswith("-") else s


def to_source(node: Node, need: int = 0) -> str:
    """Print with the fewest parentheses that still parse back to the same tree."""
    if isinstance(node, Expr):
        node = node.root
    match node:
        case Num(value=v):
            s, lvl = _fmt_num(v), 9
        case Var():
            s, lvl = "t", 9
        case Const(name=n):
            s, lvl = n, 9
        case Call(name=n, args=args):
            s, lvl = f"{n}({', '.join(to_source(a) for a in args)})", 9
        case Neg(operand=x):
            s, lvl = "-" + to_source(x, 7), 7
        case Bin(op="^", left=a, right=b):
            s, lvl = f"{to_source(a, 9)}^{to_source(b, 7)}", 8
        case Bin(op=op, left=a, right=b):
            lvl = _LEVEL[op]
            s = f"{to_source(a, lvl)} {op} {to_source(b, lvl + 1)}"
        case Compare(op=op, left=a, right=b):
            s, lvl = f"{to_source(a, 5)} {op} {to_source(b, 5)}", 4
        case Logic(op=op, left=a, right=b):
            lvl = _LEVEL[op]
            s = f"{to_source(a, lvl)} {op} {to_source(b, lvl + 1)}"
        case Not(operand=x):
            s, lvl = "not " + to_source(x, 3), 3
        case If(cond=c, then=a, other=b):
            s, lvl = f"if {to_source(c, 1)} then {to_source(a)} else {to_source(b)}", 0
        case _:
            raise TypeError(node)
    return f"({s})" if lvl < need else s


# -- evaluator ----------------------------------------------------------


class _Ctx:
    __slots__ = ("ts", "left")

    def __init__(self, ts, left):
        self.ts = ts
        self.left = left


def _fail(msg: str, t: np.ndarray, bad: np.ndarray):
    where = float(np.broadcast_to(t, bad.shape)[bad][0]) if t.ndim else float(t)
    raise EvalError(f"{msg} at t={where!r}")


def _scale_call(name: str, x: np.ndarray, ctx: _Ctx) -> np.ndarray:
    ts = ctx.ts
    if ts is None:
        raise EvalError(f"{name}() needs a time scale")
    if name == "sigma":
        return ts.sigma_array(x, ctx.left)
    if name == "mu":
        return ts.mu_array(x, ctx.left)
    if name == "rho":
        return ts.rho_array(x, ctx.left)
    if name == "rho2":
        return ts.rho_array(ts.rho_array(x, ctx.left))
    if name == "scattered":
        return ts.mu_array(x, ctx.left) > 0
    raise AssertionError(name)


def _ev(node: Node, t: np.ndarray, ctx: _Ctx) -> np.ndarray:
    match node:
        case Num(value=v):
            return np.full(t.shape, v)
        case Var():
            return t
        case Const(name=n):
            return np.full(t.shape, CONSTANTS[n])
        case Neg(operand=x):
            return -_ev(x, t, ctx)
        case Bin(op=op, left=a, right=b):
            x, y = _ev(a, t, ctx), _ev(b, t, ctx)
            if op == "+":
                return x + y
            if op == "-":
                return x - y
            if op == "*":
                return x * y
            if op == "/":
                bad = y == 0
                if np.any(bad):
                    _fail("division by zero", t, bad)
                return x / y
            bad = ((x < 0) & (y != np.floor(y))) | ((x == 0) & (y < 0))
            if np.any(bad):
                _fail("power undefined", t, bad)
            with np.errstate(over="ignore"):
                r = np.power(x, y)
            if not np.all(np.isfinite(r)):
                _fail("power overflow", t, ~np.isfinite(r))
            return r
        case Call(name=name, args=args):
            if name in SCALE_FUNCTIONS:
                return _scale_call(name, _ev(args[0], t, ctx), ctx)
            vals = [_ev(a, t, ctx) for a in args]
            x = vals[0]
            if name == "min":
                return np.minimum.reduce(vals)
            if name == "max":
                return np.maximum.reduce(vals)
            if name == "ln":
                if np.any(x <= 0):
                    _fail("ln of a non-positive number", t, x <= 0)
                return np.log(x)
            if name == "sqrt":
                if np.any(x < 0):
                    _fail("sqrt of a negative number", t, x < 0)
                return np.sqrt(x)
            if name == "abs":
                return np.abs(x)
            if name == "floor":
                return np.floor(x)
            if name == "frac":
                return x - np.floor(x)
            with np.errstate(over="ignore"):
                r = {"exp": np.exp, "sinh": np.sinh, "cosh": np.cosh}[name](x)
            if not np.all(np.isfinite(r)):
                _fail(f"{name} overflow", t, ~np.isfinite(r))
            return r
        case Compare(op=op, left=a, right=b):
            x, y = _ev(a, t, ctx), _ev(b, t, ctx)
            return {
                "<": np.less,
                "<=": np.less_equal,
                ">": np.greater,
                ">=": np.greater_equal,
                "==": np.equal,
                "!=": np.not_equal,
            }[op](x, y)
        case Logic(op=op, left=a, right=b):
            x = _ev(a, t, ctx)
            out = x.copy()
            # short-circuit per element
            todo = ~x if op == "or" else x
            if np.any(todo):
                out[todo] = _ev(b, t[todo], ctx)
            return out
        case Not(operand=x):
            return ~_ev(x, t, ctx)
        case If(cond=c, then=a, other=b):
            mask = _ev(c, t, ctx)
            out = np.empty(t.shape)
            if np.any(mask):
                out[mask] = _ev(a, t[mask], ctx)
            if not np.all(mask):
                out[~mask] = _ev(b, t[~mask], ctx)
            return out
    raise TypeError(node)


def _substitute(node: Node, repl: Node) -> Node:
    match node:
        case Var():
            return repl
        case Num() | Const():
            return node
        case Neg(operand=x):
            return Neg(_substitute(x, repl), pos=node.pos)
        case Not(operand=x):
            return Not(_substitute(x, repl), pos=node.pos)
        case Bin(op=op, left=a, right=b):
            return Bin(op, _substitute(a, repl), _substitute(b, repl), pos=node.pos)
        case Compare(op=op, left=a, right=b):
            return Compare(op, _substitute(a, repl), _substitute(b, repl), pos=node.pos)
        case Logic(op=op, left=a, right=b):
            return Logic(op, _substitute(a, repl), _substitute(b, repl), pos=node.pos)
        case Call(name=n, args=args):
            return Call(n, tuple(_substitute(a, repl) for a in args), pos=node.pos)
        case If(cond=c, then=a, other=b):
            return If(_substitute(c, repl), _substitute(a, repl), _substitute(b, repl), pos=node.pos)
    raise TypeError(node)


def _walk(node: Node):
    yield node
    for child in getattr(node, "args", ()) or ():
        yield from _walk(child)
    for name in ("operand", "left", "right", "cond", "then", "other"):
        child = getattr(node, name, None)
        if isinstance(child, Node):
            yield from _walk(child)


@dataclass(frozen=True)
class Expr:
    """A parsed numeric expression in the variable t."""

    root: Node

    def __str__(self):
        return to_source(self.root)

    def __repr__(self):
        return f"Expr({to_source(self.root)!r})"

    @property
    def uses_scale(self) -> bool:
        return any(isinstance(n, Call) and n.name in SCALE_FUNCTIONS for n in _walk(self.root))

    def evaluate(self, t, ts=None, left: bool = False):
        """Value at t (scalar or array).

        `left=True` evaluates scale primitives as left-dense limits, which is
        how left limits at right ends of dense intervals are sampled.
        """
        arr = np.asarray(t, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        try:
            out = _ev(self.root, arr, _Ctx(ts, left))
        except HorizonExceeded as exc:  # pragma: no cover - vectorised calls clamp instead
            raise EvalError(str(exc)) from None
        out = np.asarray(out, dtype=float)
        return float(out[0]) if scalar else out

    def substitute(self, replacement: "Expr") -> "Expr":
        """Replace every occurrence of t by another expression."""
        return Expr(_substitute(self.root, replacement.root))


def evaluate(e: Expr, t, ts=None, left: bool = False):
    return e.evaluate(t, ts, left)


def const(value: float) -> Expr:
    return Expr(Num(float(value)))
