"""Feature-expression DSL: lexer, parser, formatter, and evaluators.

Objectives, metric gains/predicates, and slice predicates are all written in
one small expression language over dataset columns:

    number and 'string' literals, column references,
    unary  - not
    binary * /  + -  == != < <= > >=  and or
    calls  log(x) abs(x) min(a,b) max(a,b) clip(x,lo,hi) matches(text, 'regex')

Precedence, tightest to loosest: unary, ``* /``, ``+ -``, comparisons,
``and``, ``or``. Comparisons and boolean operators always evaluate to 0.0 or
1.0. Chained comparisons (``a < b < c``) are rejected; write
``(a < b) and (b < c)``. Strings participate only in ``==``/``!=`` against
literals and as the subject of ``matches``.

Degenerate numerics never abort an evaluation: ``x / 0`` and ``log(x <= 0)``
yield 0.0 and bump the context's warning counter instead.

There are two evaluators with identical semantics: :func:`evaluate` walks one
row at a time (the reference), and :func:`evaluate_columns` runs the same tree
over whole numpy columns for batch recomputes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Num",
    "Str",
    "Col",
    "Unary",
    "Binary",
    "Call",
    "Expr",
    "FUNCTIONS",
    "ParseError",
    "UnboundColumn",
    "EvalTypeError",
    "EvalContext",
    "parse",
    "evaluate",
    "format_expr",
    "evaluate_columns",
    "TypeIssue",
    "check_types",
    "column_references",
]


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Col:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "-" | "not"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # arithmetic, comparison, or boolean operator
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Str, Col, Unary, Binary, Call]

# Builtin functions and their arity. `matches` takes (text, pattern-literal).
FUNCTIONS: dict[str, int] = {
    "log": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
    "clip": 3,
    "matches": 2,
}

_ARITH_OPS = {"+", "-", "*", "/"}
_EQUALITY_OPS = {"==", "!="}
_ORDER_OPS = {"<", "<=", ">", ">="}
_COMPARISON_OPS = _EQUALITY_OPS | _ORDER_OPS
_BOOL_OPS = {"and", "or"}


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class ParseError(ValueError):
    """Raised on malformed expression text.

    Carries the byte offset of the failure and the set of token descriptions
    that would have been accepted there.
    """

    def __init__(self, message: str, pos: int, expected: tuple[str, ...] = ()):
        self.pos = pos
        self.expected = expected
        detail = f"{message} at offset {pos}"
        if expected:
            detail += " (expected " + ", ".join(expected) + ")"
        super().__init__(detail)


class UnboundColumn(KeyError):
    """A referenced column has no binding; only reachable if validation was skipped."""


class EvalTypeError(TypeError):
    """Operands of the wrong type at runtime; only reachable if validation was skipped."""


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|[-+*/<>(),])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not"}


@dataclass(frozen=True)
class _Token:
    kind: str  # NUMBER STRING IDENT AND OR NOT OP LPAREN RPAREN COMMA EOF
    text: str
    pos: int


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i] == "'":
            value, i2 = _lex_string(text, i)
            tokens.append(_Token("STRING", value, i))
            i = i2
            continue
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", i)
        if m.lastgroup == "ws":
            i = m.end()
            continue
        raw = m.group()
        if m.lastgroup == "number":
            tokens.append(_Token("NUMBER", raw, i))
        elif m.lastgroup == "ident":
            if raw in _KEYWORDS:
                tokens.append(_Token(raw.upper(), raw, i))
            else:
                tokens.append(_Token("IDENT", raw, i))
        else:
            kind = {"(": "LPAREN", ")": "RPAREN", ",": "COMMA"}.get(raw, "OP")
            tokens.append(_Token(kind, raw, i))
        i = m.end()
    tokens.append(_Token("EOF", "", n))
    return tokens


def _lex_string(text: str, start: int) -> tuple[str, int]:
    # Single-quoted; \\ and \' are escapes, any other backslash pair is kept
    # verbatim so regex patterns like '\s*' need no double escaping.
    out: list[str] = []
    i = start + 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "'":
            return "".join(out), i + 1
        if ch == "\\" and i + 1 < n:
            nxt = text[i + 1]
            if nxt in ("\\", "'"):
                out.append(nxt)
            else:
                out.append(ch)
                out.append(nxt)
            i += 2
            continue
        out.append(ch)
        i += 1
    raise ParseError("unterminated string literal", start, ("'",))


# ---------------------------------------------------------------------------
# Parser (recursive descent, one level per precedence tier)
# ---------------------------------------------------------------------------

_ATOM_EXPECTED = ("number", "string", "column name", "function call", "'('", "'-'", "'not'")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, expected: tuple[str, ...]) -> _Token:
        if self.cur.kind != kind:
            raise ParseError(f"unexpected {self._describe(self.cur)}", self.cur.pos, expected)
        return self.advance()

    @staticmethod
    def _describe(tok: _Token) -> str:
        return "end of input" if tok.kind == "EOF" else f"token {tok.text!r}"

    def parse(self) -> Expr:
        expr = self.or_expr()
        if self.cur.kind != "EOF":
            raise ParseError(
                f"unexpected {self._describe(self.cur)}", self.cur.pos, ("end of input",)
            )
        return expr

    def or_expr(self) -> Expr:
        node = self.and_expr()
        while self.cur.kind == "OR":
            self.advance()
            node = Binary("or", node, self.and_expr())
        return node

    def and_expr(self) -> Expr:
        node = self.cmp_expr()
        while self.cur.kind == "AND":
            self.advance()
            node = Binary("and", node, self.cmp_expr())
        return node

    def cmp_expr(self) -> Expr:
        node = self.add_expr()
        if self.cur.kind == "OP" and self.cur.text in _COMPARISON_OPS:
            op = self.advance().text
            node = Binary(op, node, self.add_expr())
            if self.cur.kind == "OP" and self.cur.text in _COMPARISON_OPS:
                raise ParseError(
                    "chained comparisons are not supported; parenthesize and combine with 'and'",
                    self.cur.pos,
                    ("'and'", "'or'", "end of input"),
                )
        return node

    def add_expr(self) -> Expr:
        node = self.mul_expr()
        while self.cur.kind == "OP" and self.cur.text in ("+", "-"):
            op = self.advance().text
            node = Binary(op, node, self.mul_expr())
        return node

    def mul_expr(self) -> Expr:
        node = self.unary()
        while self.cur.kind == "OP" and self.cur.text in ("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.cur.kind == "OP" and self.cur.text == "-":
            self.advance()
            return Unary("-", self.unary())
        if self.cur.kind == "NOT":
            self.advance()
            return Unary("not", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "NUMBER":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "STRING":
            self.advance()
            return Str(tok.text)
        if tok.kind == "IDENT":
            self.advance()
            if self.cur.kind == "LPAREN":
                return self.call(tok)
            return Col(tok.text)
        if tok.kind == "LPAREN":
            self.advance()
            node = self.or_expr()
            self.expect("RPAREN", ("')'",))
            return node
        raise ParseError(f"unexpected {self._describe(tok)}", tok.pos, _ATOM_EXPECTED)

    def call(self, name_tok: _Token) -> Expr:
        name = name_tok.text
        if name not in FUNCTIONS:
            raise ParseError(
                f"unknown function {name!r}", name_tok.pos, tuple(sorted(FUNCTIONS))
            )
        self.expect("LPAREN", ("'('",))
        args: list[Expr] = []
        if self.cur.kind != "RPAREN":
            args.append(self.or_expr())
            while self.cur.kind == "COMMA":
                self.advance()
                args.append(self.or_expr())
        self.expect("RPAREN", ("')'", "','"))
        if len(args) != FUNCTIONS[name]:
            raise ParseError(
                f"function {name!r} takes {FUNCTIONS[name]} argument(s), got {len(args)}",
                name_tok.pos,
            )
        return Call(name, tuple(args))


def parse(text: str) -> Expr:
    """Parse expression text into an AST, or raise :class:`ParseError`."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Formatter
# ---------------------------------------------------------------------------

_PREC = {"or": 1, "and": 2, "cmp": 3, "add": 4, "mul": 5, "unary": 6, "atom": 7}


def _prec_of(e: Expr) -> int:
    if isinstance(e, Binary):
        if e.op in _BOOL_OPS:
            return _PREC[e.op]
        if e.op in _COMPARISON_OPS:
            return _PREC["cmp"]
        if e.op in ("+", "-"):
            return _PREC["add"]
        return _PREC["mul"]
    if isinstance(e, Unary):
        return _PREC["unary"]
    return _PREC["atom"]


def _format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _format_string(s: str) -> str:
    return "'" + s.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_expr(e: Expr) -> str:
    """Canonical text with minimal parentheses; reparses to an equal AST."""
    if isinstance(e, Num):
        return _format_number(e.value)
    if isinstance(e, Str):
        return _format_string(e.value)
    if isinstance(e, Col):
        return e.name
    if isinstance(e, Call):
        return e.func + "(" + ", ".join(format_expr(a) for a in e.args) + ")"
    if isinstance(e, Unary):
        inner = format_expr(e.operand)
        if _prec_of(e.operand) < _PREC["unary"]:
            inner = f"({inner})"
        return f"-{inner}" if e.op == "-" else f"not {inner}"
    assert isinstance(e, Binary)
    prec = _prec_of(e)
    is_cmp = e.op in _COMPARISON_OPS
    left = format_expr(e.left)
    # The parser is left-associative, so same-precedence right children always
    # need parentheses; comparisons are non-associative on both sides.
    if _prec_of(e.left) < prec or (is_cmp and _prec_of(e.left) == prec):
        left = f"({left})"
    right = format_expr(e.right)
    if _prec_of(e.right) <= prec:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------------------
# Row-at-a-time evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalContext:
    """One item row merged with its query features, plus a warning counter."""

    bindings: Mapping[str, float | str]
    warnings: int = 0


_REGEX_CACHE: dict[str, re.Pattern[str]] = {}


def _compiled(pattern: str) -> re.Pattern[str]:
    rx = _REGEX_CACHE.get(pattern)
    if rx is None:
        rx = _REGEX_CACHE[pattern] = re.compile(pattern)
    return rx


def evaluate(e: Expr, ctx: EvalContext) -> float:
    """Evaluate to a real number; comparisons and booleans yield 0.0/1.0."""
    value = _eval(e, ctx)
    if isinstance(value, str):
        raise EvalTypeError("expression yields text, not a number")
    return value


def _num(value: float | str, what: str) -> float:
    if isinstance(value, str):
        raise EvalTypeError(f"{what} requires a numeric operand")
    return value


def _eval(e: Expr, ctx: EvalContext) -> float | str:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Str):
        return e.value
    if isinstance(e, Col):
        try:
            return ctx.bindings[e.name]
        except KeyError:
            raise UnboundColumn(e.name) from None
    if isinstance(e, Unary):
        v = _num(_eval(e.operand, ctx), f"unary {e.op!r}")
        if e.op == "-":
            return -v
        return 1.0 if v == 0.0 else 0.0
    if isinstance(e, Call):
        return _eval_call(e, ctx)
    assert isinstance(e, Binary)
    op = e.op
    lhs = _eval(e.left, ctx)
    rhs = _eval(e.right, ctx)
    if op in _EQUALITY_OPS:
        if isinstance(lhs, str) != isinstance(rhs, str):
            raise EvalTypeError("cannot compare text with a number")
        eq = lhs == rhs
        return float(eq if op == "==" else not eq)
    lv = _num(lhs, f"operator {op!r}")
    rv = _num(rhs, f"operator {op!r}")
    if op == "+":
        return lv + rv
    if op == "-":
        return lv - rv
    if op == "*":
        return lv * rv
    if op == "/":
        if rv == 0.0:
            ctx.warnings += 1
            return 0.0
        return lv / rv
    if op == "<":
        return float(lv < rv)
    if op == "<=":
        return float(lv <= rv)
    if op == ">":
        return float(lv > rv)
    if op == ">=":
        return float(lv >= rv)
    if op == "and":
        return float(lv != 0.0 and rv != 0.0)
    assert op == "or"
    return float(lv != 0.0 or rv != 0.0)


def _eval_call(e: Call, ctx: EvalContext) -> float:
    name = e.func
    if name == "matches":
        subject = _eval(e.args[0], ctx)
        pattern = _eval(e.args[1], ctx)
        if not isinstance(subject, str) or not isinstance(pattern, str):
            raise EvalTypeError("matches() requires text arguments")
        return 1.0 if _compiled(pattern).search(subject) else 0.0
    args = [_num(_eval(a, ctx), f"{name}()") for a in e.args]
    if name == "log":
        if args[0] <= 0.0:
            ctx.warnings += 1
            return 0.0
        return math.log(args[0])
    if name == "abs":
        return abs(args[0])
    if name == "min":
        return min(args[0], args[1])
    if name == "max":
        return max(args[0], args[1])
    assert name == "clip"
    return min(max(args[0], args[1]), args[2])


# ---------------------------------------------------------------------------
# Column-at-a-time evaluation
# ---------------------------------------------------------------------------


@dataclass
class _VecState:
    columns: Mapping[str, np.ndarray]
    n: int
    warnings: int = 0


def evaluate_columns(
    e: Expr, columns: Mapping[str, np.ndarray], n: int
) -> tuple[np.ndarray, int]:
    """Evaluate over whole columns: float64 arrays for numeric/boolean columns,
    object arrays of str for categorical/text. Returns (values, warning count);
    semantics match :func:`evaluate` element for element.
    """
    state = _VecState(columns, n)
    out = _veval(e, state)
    if isinstance(out, str) or out.dtype == object:
        raise EvalTypeError("expression yields text, not a number")
    return out, state.warnings


def _vnum(value: np.ndarray | str, what: str) -> np.ndarray:
    if isinstance(value, str) or value.dtype == object:
        raise EvalTypeError(f"{what} requires a numeric operand")
    return value


def _veval(e: Expr, state: _VecState) -> np.ndarray | str:
    if isinstance(e, Num):
        return np.full(state.n, e.value)
    if isinstance(e, Str):
        return e.value
    if isinstance(e, Col):
        try:
            return state.columns[e.name]
        except KeyError:
            raise UnboundColumn(e.name) from None
    if isinstance(e, Unary):
        v = _vnum(_veval(e.operand, state), f"unary {e.op!r}")
        if e.op == "-":
            return -v
        return (v == 0.0).astype(np.float64)
    if isinstance(e, Call):
        return _veval_call(e, state)
    assert isinstance(e, Binary)
    op = e.op
    lhs = _veval(e.left, state)
    rhs = _veval(e.right, state)
    if op in _EQUALITY_OPS:
        l_str = isinstance(lhs, str) or lhs.dtype == object
        r_str = isinstance(rhs, str) or rhs.dtype == object
        if l_str != r_str:
            raise EvalTypeError("cannot compare text with a number")
        eq = np.equal(lhs, rhs)
        if not isinstance(eq, np.ndarray):  # str literal == str literal
            eq = np.full(state.n, eq, dtype=bool)
        return (eq if op == "==" else ~eq).astype(np.float64)
    lv = _vnum(lhs, f"operator {op!r}")
    rv = _vnum(rhs, f"operator {op!r}")
    if op == "+":
        return lv + rv
    if op == "-":
        return lv - rv
    if op == "*":
        return lv * rv
    if op == "/":
        zero = rv == 0.0
        state.warnings += int(np.count_nonzero(zero))
        return np.where(zero, 0.0, lv / np.where(zero, 1.0, rv))
    if op == "<":
        return (lv < rv).astype(np.float64)
    if op == "<=":
        return (lv <= rv).astype(np.float64)
    if op == ">":
        return (lv > rv).astype(np.float64)
    if op == ">=":
        return (lv >= rv).astype(np.float64)
    if op == "and":
        return ((lv != 0.0) & (rv != 0.0)).astype(np.float64)
    assert op == "or"
    return ((lv != 0.0) | (rv != 0.0)).astype(np.float64)


def _veval_call(e: Call, state: _VecState) -> np.ndarray:
    name = e.func
    if name == "matches":
        subject = _veval(e.args[0], state)
        pattern = _veval(e.args[1], state)
        if not isinstance(pattern, str):
            raise EvalTypeError("matches() pattern must be a string literal")
        rx = _compiled(pattern)
        if isinstance(subject, str):
            return np.full(state.n, 1.0 if rx.search(subject) else 0.0)
        if subject.dtype != object:
            raise EvalTypeError("matches() requires text arguments")
        return np.fromiter(
            (1.0 if rx.search(s) else 0.0 for s in subject), np.float64, state.n
        )
    args = [_vnum(_veval(a, state), f"{name}()") for a in e.args]
    if name == "log":
        bad = args[0] <= 0.0
        state.warnings += int(np.count_nonzero(bad))
        return np.where(bad, 0.0, np.log(np.where(bad, 1.0, args[0])))
    if name == "abs":
        return np.abs(args[0])
    if name == "min":
        return np.minimum(args[0], args[1])
    if name == "max":
        return np.maximum(args[0], args[1])
    assert name == "clip"
    return np.minimum(np.maximum(args[0], args[1]), args[2])


# ---------------------------------------------------------------------------
# Static type checking against a column-kind table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeIssue:
    kind: str  # unknown_column | type_error | scope_error | bad_regex
    message: str


_T_NUM = "num"
_T_STR = "str"
_T_ANY = "any"  # error recovery: silences cascading issues


def check_types(
    e: Expr,
    column_kinds: Mapping[str, str],
    *,
    allowed: frozenset[str] | None = None,
    numeric_root: bool = True,
) -> list[TypeIssue]:
    """Check column references and operand types without evaluating.

    `column_kinds` maps column name to its declared kind. `allowed`, when
    given, restricts which columns may be referenced (slice predicates are
    limited to query-level columns). Arithmetic and ordering need numeric
    operands; text joins in only via ==/!= against a string literal and as
    the subject of matches().
    """
    issues: list[TypeIssue] = []
    root = _check(e, column_kinds, allowed, issues)
    if numeric_root and root == _T_STR:
        issues.append(
            TypeIssue("type_error", "expression yields text where a number is required")
        )
    return issues


def _check(
    e: Expr,
    kinds: Mapping[str, str],
    allowed: frozenset[str] | None,
    issues: list[TypeIssue],
) -> str:
    if isinstance(e, Num):
        return _T_NUM
    if isinstance(e, Str):
        return _T_STR
    if isinstance(e, Col):
        if e.name not in kinds:
            issues.append(TypeIssue("unknown_column", f"unknown column {e.name!r}"))
            return _T_ANY
        if allowed is not None and e.name not in allowed:
            issues.append(
                TypeIssue("scope_error", f"column {e.name!r} is not a query-level column")
            )
            return _T_ANY
        return _T_NUM if kinds[e.name] in ("numeric", "boolean") else _T_STR
    if isinstance(e, Unary):
        t = _check(e.operand, kinds, allowed, issues)
        if t == _T_STR:
            issues.append(
                TypeIssue("type_error", f"unary {e.op!r} applied to a text value")
            )
        return _T_NUM
    if isinstance(e, Call):
        return _check_call(e, kinds, allowed, issues)
    assert isinstance(e, Binary)
    lt = _check(e.left, kinds, allowed, issues)
    rt = _check(e.right, kinds, allowed, issues)
    if e.op in _EQUALITY_OPS:
        if _T_ANY in (lt, rt):
            return _T_NUM
        if lt == _T_NUM and rt == _T_NUM:
            return _T_NUM
        if lt == _T_STR and rt == _T_STR:
            if not (isinstance(e.left, Str) or isinstance(e.right, Str)):
                issues.append(
                    TypeIssue(
                        "type_error",
                        "text columns can only be compared to string literals",
                    )
                )
            return _T_NUM
        issues.append(
            TypeIssue("type_error", f"operator {e.op!r} cannot mix text and numbers")
        )
        return _T_NUM
    label = (
        "arithmetic" if e.op in _ARITH_OPS
        else "ordering comparison" if e.op in _ORDER_OPS
        else "boolean operator"
    )
    for t in (lt, rt):
        if t == _T_STR:
            issues.append(TypeIssue("type_error", f"{label} {e.op!r} on a text value"))
    return _T_NUM


def _check_call(
    e: Call,
    kinds: Mapping[str, str],
    allowed: frozenset[str] | None,
    issues: list[TypeIssue],
) -> str:
    if e.func == "matches":
        subject = _check(e.args[0], kinds, allowed, issues)
        if subject == _T_NUM:
            issues.append(
                TypeIssue("type_error", "matches() subject must be a text column")
            )
        if not isinstance(e.args[1], Str):
            _check(e.args[1], kinds, allowed, issues)
            issues.append(
                TypeIssue("type_error", "matches() pattern must be a string literal")
            )
        else:
            try:
                re.compile(e.args[1].value)
            except re.error as exc:
                issues.append(TypeIssue("bad_regex", f"invalid regex: {exc}"))
        return _T_NUM
    for arg in e.args:
        t = _check(arg, kinds, allowed, issues)
        if t == _T_STR:
            issues.append(
                TypeIssue("type_error", f"{e.func}() requires numeric arguments")
            )
    return _T_NUM


def column_references(e: Expr) -> frozenset[str]:
    """All column names referenced anywhere in the expression."""
    out: set[str] = set()
    _collect_refs(e, out)
    return frozenset(out)


def _collect_refs(e: Expr, out: set[str]) -> None:
    if isinstance(e, Col):
        out.add(e.name)
    elif isinstance(e, Unary):
        _collect_refs(e.operand, out)
    elif isinstance(e, Binary):
        _collect_refs(e.left, out)
        _collect_refs(e.right, out)
    elif isinstance(e, Call):
        for a in e.args:
            _collect_refs(a, out)
