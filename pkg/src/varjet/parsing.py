"""Infix expression grammar and the line-oriented problem file format.

Expressions use ``+ - * / ^`` with ``^`` for powers (exponents must fold to
exact integers or rationals), function call syntax for ``sin cos exp log
sqrt``, the constant ``pi``, and integer/decimal literals read as exact
rationals.  Problem files are ``key = value`` lines with ``#`` comments;
see the README for the documented key set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import expr as ex
from .charts import JetChart, SectionSamples, make_chart
from .expr import Expr
from .geometry import MetricChart, metric_catalog, metric_chart
from .stability import TrialDeformation
from .variation import Lagrangian

__all__ = [
    "ExprParseError",
    "SpecFileError",
    "parse_expression",
    "ProblemSpec",
    "parse_problem_file",
    "parse_problem_text",
    "chart_to_spec_lines",
]

_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class SpecFileError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        where = f"line {line}" + (f", column {col}" if col is not None else "") + ": " if line else ""
        super().__init__(where + message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# tokenizer / recursive-descent parser
# ---------------------------------------------------------------------------

_OPS = "+-*/^(),"


def _tokenize(src: str, line: int):
    toks = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch in " \t":
            i += 1
            continue
        col = i + 1
        if ch in _OPS:
            toks.append(("op", ch, col))
            i += 1
        elif ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (src[j].isdigit() or (src[j] == "." and not seen_dot)):
                if src[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    while k < n and src[k].isdigit():
                        k += 1
                    j = k
            toks.append(("num", src[i:j], col))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_" or src[j] == ","):
                # commas are list separators, never part of a name
                if src[j] == ",":
                    break
                j += 1
            toks.append(("name", src[i:j], col))
            i = j
        else:
            raise ExprParseError(f"unexpected character {ch!r}", line, col)
    toks.append(("end", "", n + 1))
    return toks


def _exact_number(text: str) -> Fraction:
    if "e" in text or "E" in text:
        mant, _, expo = text.replace("E", "e").partition("e")
        return _exact_number(mant) * Fraction(10) ** int(expo)
    if "." in text:
        whole, _, frac = text.partition(".")
        denom = 10 ** len(frac)
        sign = -1 if whole.startswith("-") else 1
        whole = whole.lstrip("+-") or "0"
        return Fraction(sign * (int(whole) * denom + int(frac or "0")), denom)
    return Fraction(int(text))


class _Parser:
    def __init__(self, toks, line: int, chart: JetChart | None, extra: dict | None = None):
        self.toks = toks
        self.pos = 0
        self.line = line
        self.chart = chart
        self.extra = extra or {}

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg: str, tok=None):
        tok = tok or self.peek()
        raise ExprParseError(msg, self.line, tok[2])

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected trailing input {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        kind, val, _ = self.peek()
        neg = False
        if kind == "op" and val in "+-":
            self.take()
            neg = val == "-"
        e = self.term()
        if neg:
            e = ex.mul(ex.num(-1), e)
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                e = ex.add(e, ex.mul(ex.num(-1), rhs) if val == "-" else rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.unary()
                e = ex.mul(e, rhs) if val == "*" else ex.mul(e, ex.pow_(rhs, -1))
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return ex.mul(ex.num(-1), self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            tok = self.take()
            expo = self.unary_power()
            if not expo.is_num() or not isinstance(expo.value, Fraction):
                self.fail("exponent must fold to an exact integer or rational", tok)
            return ex.pow_(base, expo.value)
        return base

    def unary_power(self) -> Expr:
        # exponent position: allow a signed atom or parenthesized constant
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return ex.mul(ex.num(-1), self.unary_power())
        return self.power()

    def atom(self) -> Expr:
        kind, val, col = self.take()
        if kind == "num":
            return ex.num(_exact_number(val))
        if kind == "op" and val == "(":
            e = self.expr()
            k2, v2, _ = self.take()
            if not (k2 == "op" and v2 == ")"):
                raise ExprParseError("expected ')'", self.line, col)
            return e
        if kind == "name":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in _FUNCTIONS:
                    raise ExprParseError(f"unknown function {val!r}", self.line, col)
                self.take()
                arg = self.expr()
                k2, v2, _ = self.take()
                if not (k2 == "op" and v2 == ")"):
                    raise ExprParseError("expected ')' after function argument", self.line, col)
                return ex.call(val, arg)
            if val == "pi":
                return ex.num(math.pi)
            if val in self.extra:
                return self.extra[val]
            if self.chart is not None:
                if not self.chart.has(val):
                    raise ExprParseError(f"unknown symbol {val!r} for this chart", self.line, col)
                return self.chart.sym(val)
            return ex.sym(val)
        raise ExprParseError(f"unexpected token {val!r}", self.line, col)


def parse_expression(
    src: str, chart: JetChart | None = None, line: int = 1, extra: dict | None = None
) -> Expr:
    """Parse an infix expression, resolving names against a chart if given.

    ``extra`` maps additional names (parameters) to replacement expressions.
    """
    return _Parser(_tokenize(src, line), line, chart, extra).parse()


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------

_KNOWN_KEYS = {
    "base",
    "fiber",
    "order",
    "lagrangian",
    "metric",
    "solution",
    "trial",
    "t0",
    "t1",
    "h",
    "panels",
    "tol",
    "seed",
}
_METRIC_KEYS = {"g11", "g12", "g13", "g21", "g22", "g23", "g31", "g32", "g33"}


@dataclass
class ProblemSpec:
    """A parsed problem file, with builders for the library objects."""

    base: tuple = ("t",)
    fiber: tuple = ("y",)
    order: int = 1
    params: dict = field(default_factory=dict)
    lagrangian_src: tuple | None = None  # (text, line)
    metric_name: str | None = None
    metric_sources: dict = field(default_factory=dict)  # (i, j) -> (text, line)
    solution_src: tuple | None = None
    trial_src: tuple | None = None
    t0: float = 0.0
    t1: float = math.pi
    h: float = 1e-3
    panels: int = 10_000
    tol: float = 1e-10
    seed: int = 0

    # -- builders ----------------------------------------------------------

    def chart(self) -> JetChart:
        aliases = {}
        if len(self.base) == 1:
            for i, nm in enumerate(self.fiber):
                aliases[f"u{i + 1}"] = f"{nm}_{self.base[0]}"
            if len(self.fiber) == 1:
                aliases["u"] = f"{self.fiber[0]}_{self.base[0]}"
        return make_chart(
            len(self.base),
            len(self.fiber),
            2 * self.order,
            base=self.base,
            fiber=self.fiber,
            aliases=aliases,
        )

    def _extra(self) -> dict:
        return {k: ex.num(v) for k, v in self.params.items()}

    def metric(self) -> MetricChart | None:
        if self.metric_name is not None:
            return metric_catalog(self.metric_name)
        if self.metric_sources:
            n = len(self.fiber)
            chart = self.chart()
            comp = [[None] * n for _ in range(n)]
            for (i, j), (text, line) in self.metric_sources.items():
                if i >= n or j >= n:
                    raise SpecFileError(f"metric key g{i + 1}{j + 1} outside dimension {n}", line)
                comp[i][j] = parse_expression(text, chart, line, self._extra())
            for i in range(n):
                for j in range(n):
                    if comp[i][j] is None:
                        if comp[j][i] is not None:
                            comp[i][j] = comp[j][i]
                        elif i == j:
                            raise SpecFileError(f"missing metric component g{i + 1}{i + 1}")
                        else:
                            comp[i][j] = ex.ZERO
            return metric_chart(comp, chart)
        return None

    def lagrangian(self) -> Lagrangian:
        metric = self.metric()
        if self.lagrangian_src is None:
            if metric is None:
                raise SpecFileError("problem file declares neither a lagrangian nor a metric")
            from .geometry import geodesic_lagrangian

            return geodesic_lagrangian(metric)
        chart = metric.chart.extended(2 * self.order) if metric is not None else self.chart()
        text, line = self.lagrangian_src
        density = parse_expression(text, chart, line, self._extra())
        return Lagrangian(chart, density, self.order)

    def solution(self, chart: JetChart) -> SectionSamples | None:
        if self.solution_src is None:
            return None
        text, line = self.solution_src
        parts = _split_top_level(text)
        if len(parts) != len(self.fiber):
            raise SpecFileError(
                f"solution needs {len(self.fiber)} comma-separated components", line
            )
        tchart = make_chart(1, 1, 1, base=(chart.base[0],), fiber=("_sol",))
        exprs = [parse_expression(p, tchart, line, self._extra()) for p in parts]
        return SectionSamples.from_exprs(chart, exprs)

    def trial(self, chart: JetChart) -> TrialDeformation | None:
        if self.trial_src is None:
            return None
        text, line = self.trial_src
        parts = _split_top_level(text)
        if len(parts) != len(self.fiber):
            raise SpecFileError(
                f"trial needs {len(self.fiber)} comma-separated components", line
            )
        tchart = make_chart(1, 1, 1, base=(chart.base[0],), fiber=("_tr",))
        comps = tuple(parse_expression(p, tchart, line, self._extra()) for p in parts)
        return TrialDeformation(comps, self.t0, self.t1)


def _split_top_level(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return [p for p in parts if p]


def _const(text: str, line: int) -> float:
    e = parse_expression(text, None, line)
    if not e.is_num():
        raise SpecFileError("expected a constant expression", line)
    return float(e.value)


def parse_problem_text(text: str) -> ProblemSpec:
    spec = ProblemSpec()
    seen: set = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        lin = raw.split("#", 1)[0].rstrip()
        if not lin.strip():
            continue
        if "=" not in lin:
            raise SpecFileError("expected 'key = value'", lineno, 1)
        key, _, value = lin.partition("=")
        key = key.strip()
        value = value.strip()
        col = raw.index("=") + 2
        if key.startswith("param "):
            name = key[6:].strip()
            if not name.isidentifier():
                raise SpecFileError(f"bad parameter name {name!r}", lineno)
            spec.params[name] = _const(value, lineno)
            continue
        if key in _METRIC_KEYS:
            i, j = int(key[1]) - 1, int(key[2]) - 1
            spec.metric_sources[(i, j)] = (value, lineno)
            continue
        if key not in _KNOWN_KEYS:
            raise SpecFileError(f"unknown key {key!r}", lineno, 1)
        if key in seen:
            raise SpecFileError(f"duplicate key {key!r}", lineno, 1)
        seen.add(key)
        if key == "base":
            spec.base = tuple(_split_top_level(value))
        elif key == "fiber":
            spec.fiber = tuple(_split_top_level(value))
        elif key == "order":
            if value not in ("1", "2"):
                raise SpecFileError("order must be 1 or 2", lineno, col)
            spec.order = int(value)
        elif key == "lagrangian":
            spec.lagrangian_src = (value, lineno)
        elif key == "metric":
            spec.metric_name = value
        elif key == "solution":
            spec.solution_src = (value, lineno)
        elif key == "trial":
            spec.trial_src = (value, lineno)
        elif key == "t0":
            spec.t0 = _const(value, lineno)
        elif key == "t1":
            spec.t1 = _const(value, lineno)
        elif key == "h":
            spec.h = _const(value, lineno)
        elif key == "panels":
            spec.panels = int(value)
        elif key == "tol":
            spec.tol = _const(value, lineno)
        elif key == "seed":
            spec.seed = int(value)
    if spec.metric_name is not None and spec.metric_sources:
        raise SpecFileError("give either a metric name or explicit components, not both")
    if spec.metric_name is not None or spec.metric_sources:
        if spec.fiber == ("y",):
            spec.fiber = ("x1", "x2")
    return spec


def parse_problem_file(path) -> ProblemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_problem_text(fh.read())


def chart_to_spec_lines(chart: JetChart, order: int) -> list[str]:
    """Chart declaration in the problem file syntax (round-trips)."""
    return [
        f"base = {', '.join(chart.base)}",
        f"fiber = {', '.join(chart.fiber)}",
        f"order = {order}",
    ]
