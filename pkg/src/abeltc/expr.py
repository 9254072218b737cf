"""Small arithmetic expression language used for ``phi``, ``g`` and ``exact``.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := primary ('^' factor)?
    primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'

so ``^`` is right-associative and binds tighter than unary minus
(``-x^2`` is ``-(x^2)``). ``pi`` and ``e`` are folded to floats at parse time.

Trees are immutable; :func:`evaluate` accepts floats or numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "Token", "Const", "Var", "Neg", "BinOp", "Call", "Expr",
    "ExprSyntaxError", "LexError", "ArityError", "UnknownFunctionError",
    "EvaluationError", "UnboundVariableError", "DomainError",
    "tokenize", "parse", "evaluate", "differentiate", "to_text",
    "free_variables", "as_function",
]


class ExprSyntaxError(ValidationError):
    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class LexError(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class UnknownFunctionError(ExprSyntaxError):
    pass


class EvaluationError(NumericalError):
    pass


class UnboundVariableError(EvaluationError):
    pass


class DomainError(EvaluationError):
    def __init__(self, message: str, subexpression: str):
        super().__init__(message)
        self.subexpression = subexpression


# {{{ tokens


@dataclass(frozen=True)
class Token:
    kind: str  # number, identifier, operator, lparen, rparen, comma
    lexeme: str
    position: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<identifier>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<operator>[-+*/^])
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    if not source or not source.strip():
        raise LexError("empty expression", 0)

    tokens = []
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise LexError(f"unexpected character {source[pos]!r}", pos)
        kind = match.lastgroup
        if kind != "ws":
            lexeme = match.group()
            if kind == "number" and not math.isfinite(float(lexeme)):
                raise LexError(f"number {lexeme!r} is not finite", pos)
            tokens.append(Token(kind, lexeme, pos))
        pos = match.end()
    return tokens


# }}}


# {{{ tree


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: Expr


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple[Expr, ...]


Expr = Union[Const, Var, Neg, BinOp, Call]

_FUNCTIONS: dict[str, tuple[int, Callable]] = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "tan": (1, np.tan),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "sqrt": (1, np.sqrt),
    "abs": (1, np.abs),
    "pow": (2, np.power),
}

_CONSTANTS = {"pi": math.pi, "e": math.e}

_BINARY: dict[str, Callable] = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


# }}}


# {{{ parser


class _Parser:
    def __init__(self, source: str, variables: frozenset[str] | None):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0
        self.variables = variables

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str) -> ExprSyntaxError:
        tok = self.peek()
        return ExprSyntaxError(message, tok.position if tok else len(self.source))

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            found = "end of input" if tok is None else repr(tok.lexeme)
            raise self.error(f"expected {kind}, found {found}")
        return self.advance()

    def at_operator(self, ops: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "operator" and tok.lexeme in ops

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek() is not None:
            raise self.error(f"unexpected {self.peek().lexeme!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.at_operator("+-"):
            op = self.advance().lexeme
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.at_operator("*/"):
            op = self.advance().lexeme
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.at_operator("-"):
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.at_operator("^"):
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of input")
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.lexeme))
        if tok.kind == "lparen":
            self.advance()
            node = self.expr()
            self.expect("rparen")
            return node
        if tok.kind == "identifier":
            self.advance()
            nxt = self.peek()
            if nxt is not None and nxt.kind == "lparen":
                return self.call(tok)
            return self.name(tok)
        raise self.error(f"unexpected {tok.lexeme!r}")

    def call(self, name_tok: Token) -> Expr:
        name = name_tok.lexeme
        if name not in _FUNCTIONS:
            raise UnknownFunctionError(f"unknown function {name!r}", name_tok.position)
        self.expect("lparen")
        args = []
        tok = self.peek()
        if tok is None or tok.kind != "rparen":
            args.append(self.expr())
            while self.peek() is not None and self.peek().kind == "comma":
                self.advance()
                args.append(self.expr())
        self.expect("rparen")
        arity = _FUNCTIONS[name][0]
        if len(args) != arity:
            raise ArityError(
                f"{name} takes {arity} argument{'s' if arity > 1 else ''}, "
                f"got {len(args)}",
                name_tok.position,
            )
        return Call(name, tuple(args))

    def name(self, tok: Token) -> Expr:
        name = tok.lexeme
        if name in _CONSTANTS:
            return Const(_CONSTANTS[name])
        if name in _FUNCTIONS:
            raise ExprSyntaxError(f"function {name!r} used without arguments", tok.position)
        if self.variables is not None and name not in self.variables:
            allowed = ", ".join(sorted(self.variables))
            raise ExprSyntaxError(
                f"unknown variable {name!r} (expected {allowed})", tok.position
            )
        return Var(name)


def parse(source: str, variables: str | set[str] | frozenset[str] | None = None) -> Expr:
    """Parse ``source`` into an expression tree.

    ``variables`` restricts which free names may appear; a single string is
    accepted for the common one-variable case (``parse("t^2", "t")``).
    """
    if isinstance(variables, str):
        variables = frozenset({variables})
    elif variables is not None:
        variables = frozenset(variables)
    return _Parser(source, variables).parse()


# }}}


# {{{ rendering

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5
_BINARY_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL, "^": _PREC_POW}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _BINARY_PREC[node.op]
    if isinstance(node, Neg):
        return _PREC_NEG
    if isinstance(node, Const) and node.value < 0:
        return _PREC_NEG
    return _PREC_ATOM


def _wrap(node: Expr, parens: bool) -> str:
    text = to_text(node)
    return f"({text})" if parens else text


def to_text(node: Expr) -> str:
    """Canonical text form; ``parse(to_text(parse(s)))`` equals ``parse(s)``."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.child, _prec(node.child) < _PREC_NEG)
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_text(arg) for arg in node.args)})"
    if isinstance(node, BinOp):
        prec = _BINARY_PREC[node.op]
        if node.op == "^":
            left = _wrap(node.left, _prec(node.left) <= _PREC_POW)
            right = _wrap(node.right, _prec(node.right) < _PREC_NEG)
            return f"{left}^{right}"
        left = _wrap(node.left, _prec(node.left) < prec)
        right = _wrap(node.right, _prec(node.right) <= prec)
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")


# }}}


# {{{ evaluation


def _check(value, node: Expr):
    if not np.all(np.isfinite(value)):
        text = to_text(node)
        raise DomainError(f"non-finite result evaluating {text!r}", text)
    return value


def _eval(node: Expr, bindings: Mapping[str, object]):
    if isinstance(node, Const):
        return np.float64(node.value)
    if isinstance(node, Var):
        try:
            value = bindings[node.name]
        except KeyError:
            raise UnboundVariableError(f"variable {node.name!r} is not bound") from None
        return _check(np.asarray(value, dtype=np.float64), node)
    if isinstance(node, Neg):
        return np.negative(_eval(node.child, bindings))
    if isinstance(node, BinOp):
        left = _eval(node.left, bindings)
        right = _eval(node.right, bindings)
        return _check(_BINARY[node.op](left, right), node)
    if isinstance(node, Call):
        func = _FUNCTIONS[node.func][1]
        args = [_eval(arg, bindings) for arg in node.args]
        return _check(func(*args), node)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Expr, bindings: Mapping[str, object]):
    """Evaluate ``node`` in double precision.

    Bindings may be floats or arrays (broadcast elementwise). A scalar result
    is returned as a plain ``float``. Any non-finite intermediate raises
    :class:`DomainError` naming the subexpression that produced it.
    """
    with np.errstate(all="ignore"):
        value = _eval(node, bindings)
    if np.ndim(value) == 0:
        return float(value)
    return value


def free_variables(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Neg):
        return free_variables(node.child)
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    return set().union(*(free_variables(arg) for arg in node.args))


def as_function(node: Expr, var: str) -> Callable:
    """Wrap ``node`` as a one-argument function of ``var``."""

    def f(x):
        return evaluate(node, {var: x})

    f.expr = node
    return f


# }}}


# {{{ differentiation

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(node: Expr, value: float | None = None) -> bool:
    return isinstance(node, Const) and (value is None or node.value == value)


def _fold(node: Expr) -> Expr:
    # collapse an all-constant node, unless doing so would produce inf/nan
    try:
        value = evaluate(node, {})
    except EvaluationError:
        return node
    return Const(value)


def _neg(u: Expr) -> Expr:
    if isinstance(u, Const):
        return Const(-u.value)
    if isinstance(u, Neg):
        return u.child
    return Neg(u)


def _add(u: Expr, v: Expr) -> Expr:
    if _is_const(u, 0.0):
        return v
    if _is_const(v, 0.0):
        return u
    node = BinOp("+", u, v)
    return _fold(node) if _is_const(u) and _is_const(v) else node


def _sub(u: Expr, v: Expr) -> Expr:
    if _is_const(v, 0.0):
        return u
    if _is_const(u, 0.0):
        return _neg(v)
    node = BinOp("-", u, v)
    return _fold(node) if _is_const(u) and _is_const(v) else node


def _mul(u: Expr, v: Expr) -> Expr:
    if _is_const(u, 0.0) or _is_const(v, 0.0):
        return _ZERO
    if _is_const(u, 1.0):
        return v
    if _is_const(v, 1.0):
        return u
    node = BinOp("*", u, v)
    return _fold(node) if _is_const(u) and _is_const(v) else node


def _div(u: Expr, v: Expr) -> Expr:
    if _is_const(v, 1.0):
        return u
    if _is_const(u, 0.0) and not _is_const(v, 0.0):
        return _ZERO
    node = BinOp("/", u, v)
    return _fold(node) if _is_const(u) and _is_const(v) else node


def _pow(u: Expr, v: Expr) -> Expr:
    if _is_const(v, 1.0):
        return u
    if _is_const(v, 0.0):
        return _ONE
    node = BinOp("^", u, v)
    return _fold(node) if _is_const(u) and _is_const(v) else node


def _call(func: str, u: Expr) -> Expr:
    node = Call(func, (u,))
    return _fold(node) if _is_const(u) else node


def _d_power(u: Expr, v: Expr, du: Expr, dv: Expr, var: str) -> Expr:
    if var not in free_variables(v):
        # c * u^(c-1) * u'
        return _mul(_mul(v, _pow(u, _sub(v, _ONE))), du)
    if var not in free_variables(u):
        return _mul(_mul(_pow(u, v), _call("log", u)), dv)
    inner = _add(_mul(dv, _call("log", u)), _div(_mul(v, du), u))
    return _mul(_pow(u, v), inner)


def differentiate(node: Expr, var: str) -> Expr:
    """Exact symbolic derivative of ``node`` with respect to ``var``.

    The result is constant-folded and stripped of neutral elements
    (``x*1``, ``x+0``, ``0*x``), nothing more.
    """
    if isinstance(node, Const):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == var else _ZERO
    if isinstance(node, Neg):
        return _neg(differentiate(node.child, var))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = differentiate(u, var), differentiate(v, var)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if node.op == "/":
            if _is_const(dv, 0.0):
                return _div(du, v)
            return _div(_sub(_mul(du, v), _mul(u, dv)), _pow(v, Const(2.0)))
        return _d_power(u, v, du, dv, var)
    if isinstance(node, Call):
        if node.func == "pow":
            u, v = node.args
            return _d_power(u, v, differentiate(u, var), differentiate(v, var), var)
        (u,) = node.args
        du = differentiate(u, var)
        if _is_const(du, 0.0):
            return _ZERO
        if node.func == "sin":
            outer = _call("cos", u)
        elif node.func == "cos":
            outer = _neg(_call("sin", u))
        elif node.func == "tan":
            outer = _div(_ONE, _pow(_call("cos", u), Const(2.0)))
        elif node.func == "exp":
            outer = _call("exp", u)
        elif node.func == "log":
            return _div(du, u)
        elif node.func == "sqrt":
            return _div(du, _mul(Const(2.0), _call("sqrt", u)))
        elif node.func == "abs":
            outer = _div(u, _call("abs", u))
        else:  # pragma: no cover - guarded by the parser
            raise ValueError(f"no derivative rule for {node.func}")
        return _mul(outer, du)
    raise TypeError(f"not an expression node: {node!r}")


# }}}
