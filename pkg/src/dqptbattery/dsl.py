"""
Expression language for user-defined two-band models.

Expressions are built from numbers, the momentum ``k``, declared parameters,
``+ - * / ^``, unary minus, parentheses, and the one-argument functions
``sin cos tan sqrt abs exp ln``. Precedence from tightest to loosest:
``^`` (right-associative), unary ``-``, ``* /``, ``+ -``.

Model files are line oriented::

    # comment
    [initial]
    d2 = 2*sin(k)
    d3 = 2*(g - cos(k))
    param.g = 0

    [final]
    param.g = 1.3

Components missing from ``[initial]`` default to ``0``. ``[final]`` inherits
every component and parameter of ``[initial]`` that it does not set itself.
Other sections (``[sweep]``, ``[scheme]``) are kept as raw key/value tables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .errors import EvalError, ParseError, UnboundSymbol
from .model_core import TwoBandSpec

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "exp": np.exp,
    "ln": np.log,
}

COMPONENTS = ("d0", "d1", "d2", "d3")


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Sym, Neg, BinOp, Call]


def to_text(node: Expr) -> str:
    """Fully parenthesized rendering; ``parse_expression(to_text(a)) == a``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def symbols(node: Expr) -> set[str]:
    if isinstance(node, Sym):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return symbols(node.operand)
    if isinstance(node, Call):
        return symbols(node.arg)
    return symbols(node.left) | symbols(node.right)


# ---------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unknown token {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text, pos):
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.tok
        if kind != "op" or text != value:
            what = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {what}", offset)
        return self.take()

    def expression(self):
        node = self.term()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, text, offset = self.tok
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "name":
            self.take()
            if self.tok[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", offset)
                self.take()
                arg = self.expression()
                self.expect(")")
                return Call(text, arg)
            if text in FUNCTIONS:
                raise ParseError(f"function {text!r} needs a parenthesized argument", offset)
            return Sym(text)
        if (kind, text) == ("op", "("):
            self.take()
            node = self.expression()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {what}", offset)


def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an AST, raising ParseError with a byte offset."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(text)
    node = parser.expression()
    kind, tok_text, offset = parser.tok
    if kind != "end":
        if tok_text == ")":
            raise ParseError("unbalanced ')'", offset)
        raise ParseError(f"trailing input {tok_text!r}", offset)
    return node


# ---------------------------------------------------------------- evaluation


def _require(ok, message):
    if not np.all(ok):
        raise EvalError(message)


def evaluate_expr(node: Expr, k, params: Mapping[str, float]):
    """Evaluate ``node`` at momentum ``k`` (float or array).

    Domain violations (division by zero, ``ln`` or ``sqrt`` of an invalid
    argument, overflow) raise EvalError instead of producing NaN/Inf.
    """
    missing = {name for name in symbols(node) if name != "k" and name not in params}
    if missing:
        raise UnboundSymbol(missing)
    with np.errstate(all="ignore"):
        return _eval(node, np.asarray(k, dtype=float) if np.ndim(k) else np.float64(k), params)


def _eval(node, k, params):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Sym):
        return k if node.name == "k" else np.float64(params[node.name])
    if isinstance(node, Neg):
        return -_eval(node.operand, k, params)
    if isinstance(node, Call):
        x = _eval(node.arg, k, params)
        if node.func == "ln":
            _require(x > 0, "domain error: ln of a non-positive value")
        elif node.func == "sqrt":
            _require(x >= 0, "domain error: sqrt of a negative value")
        out = FUNCTIONS[node.func](x)
        _require(np.isfinite(out), f"domain error: {node.func} is not finite")
        return out
    a = _eval(node.left, k, params)
    b = _eval(node.right, k, params)
    if node.op == "+":
        out = a + b
    elif node.op == "-":
        out = a - b
    elif node.op == "*":
        out = a * b
    elif node.op == "/":
        _require(b != 0, "domain error: division by zero")
        out = a / b
    else:
        out = np.power(a, b)
    _require(np.isfinite(out), f"domain error: {node.op!r} produced a non-finite value")
    return out


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class ModelDefinition:
    d0_expr: Expr
    d1_expr: Expr
    d2_expr: Expr
    d3_expr: Expr
    params: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_strings(cls, d0="0", d1="0", d2="0", d3="0", **params):
        return cls(*(parse_expression(s) for s in (d0, d1, d2, d3)), params=dict(params))

    @property
    def expressions(self):
        return (self.d0_expr, self.d1_expr, self.d2_expr, self.d3_expr)

    def with_params(self, **updates) -> "ModelDefinition":
        merged = dict(self.params)
        merged.update(updates)
        return ModelDefinition(*self.expressions, params=merged)

    def validate(self):
        missing = set()
        for expr in self.expressions:
            missing |= {s for s in symbols(expr) if s != "k" and s not in self.params}
        if missing:
            raise UnboundSymbol(missing)


class _CompiledShift:
    def __init__(self, expr, params):
        self.expr = expr
        self.params = dict(params)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        return np.broadcast_to(evaluate_expr(self.expr, k, self.params), k.shape).astype(float)


class _CompiledVector:
    def __init__(self, exprs, params):
        self.exprs = tuple(exprs)
        self.params = dict(params)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        parts = [np.broadcast_to(evaluate_expr(e, k, self.params), k.shape) for e in self.exprs]
        return np.stack(parts).astype(float)


def compile_model(definition: ModelDefinition) -> TwoBandSpec:
    """Turn a validated definition into a TwoBandSpec evaluated through ``evaluate_expr``."""
    definition.validate()
    params = {name: float(value) for name, value in definition.params.items()}
    return TwoBandSpec(
        d0=_CompiledShift(definition.d0_expr, params),
        d=_CompiledVector(definition.expressions[1:], params),
        params=params,
    )


# ---------------------------------------------------------------- model files


@dataclass
class ModelFile:
    initial: ModelDefinition
    final: ModelDefinition
    sections: dict[str, dict[str, str]]

    def quench(self):
        from .model_core import QuenchSetup

        return QuenchSetup(compile_model(self.initial), compile_model(self.final))


_SECTION = re.compile(r"^\[\s*([A-Za-z_][A-Za-z_0-9]*)\s*\]\s*$")
_ENTRY = re.compile(r"^([A-Za-z_][A-Za-z_0-9.]*)\s*=\s*")
_PARAM_KEY = re.compile(r"^param\.([A-Za-z_][A-Za-z_0-9]*)$")


def _strip_comment(line):
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_model_file(text: str) -> ModelFile:
    """Parse a model-definition file; errors carry line and column (1-based)."""
    raw: dict[str, dict[str, tuple[str, int, int]]] = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line).rstrip()
        if not body.strip():
            continue
        indent = len(body) - len(body.lstrip())
        stripped = body.strip()
        if stripped.startswith("["):
            m = _SECTION.match(stripped)
            if m is None:
                raise ParseError("malformed section header", line=lineno, column=indent + 1)
            current = m.group(1)
            if current in raw:
                raise ParseError(f"duplicate section [{current}]", line=lineno, column=indent + 1)
            raw[current] = {}
            continue
        m = _ENTRY.match(stripped)
        if m is None:
            raise ParseError("expected 'key = value'", line=lineno, column=indent + 1)
        if current is None:
            raise ParseError("entry outside of a section", line=lineno, column=indent + 1)
        key = m.group(1)
        if key in raw[current]:
            raise ParseError(f"duplicate key {key!r}", line=lineno, column=indent + 1)
        value = stripped[m.end():]
        raw[current][key] = (value, lineno, indent + m.end() + 1)

    for name in ("initial", "final"):
        if name not in raw:
            raise ParseError(f"missing [{name}] section", line=1, column=1)

    initial = _definition(raw["initial"], None)
    final = _definition(raw["final"], initial)
    others = {
        name: {key: value for key, (value, _, _) in entries.items()}
        for name, entries in raw.items()
        if name not in ("initial", "final")
    }
    return ModelFile(initial, final, others)


def _definition(entries, base: ModelDefinition | None) -> ModelDefinition:
    exprs = dict(zip(COMPONENTS, base.expressions)) if base else {c: Num(0.0) for c in COMPONENTS}
    params = dict(base.params) if base else {}
    for key, (value, lineno, col) in entries.items():
        if key in COMPONENTS:
            try:
                exprs[key] = parse_expression(value)
            except ParseError as err:
                raise err.located(lineno, col + _char_column(value, err.offset or 0)) from None
            continue
        m = _PARAM_KEY.match(key)
        if m is None:
            raise ParseError(f"unknown key {key!r}", line=lineno, column=1)
        try:
            params[m.group(1)] = float(value)
        except ValueError:
            raise ParseError(f"parameter {key!r} is not a number: {value!r}", line=lineno, column=col) from None
    definition = ModelDefinition(*(exprs[c] for c in COMPONENTS), params=params)
    definition.validate()
    return definition


def _char_column(text, byte_offset):
    return len(text.encode("utf-8")[:byte_offset].decode("utf-8", errors="ignore"))
