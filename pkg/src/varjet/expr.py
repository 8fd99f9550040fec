"""Immutable symbolic expressions over named coordinates.

Expressions are kept in a structurally canonical form at all times: sums and
products are flattened, commutative children are sorted under a fixed total
order, numeric constants are folded (exact rationals when possible, IEEE
doubles otherwise), like terms and like factors are collected, and zero
summands / unit factors are removed.  Two expressions that agree after
canonicalization compare equal (``==``) and hash equal.

No transcendental identities are applied: ``sin(x)**2 + cos(x)**2`` stays as
written.  Identity checking for such expressions goes through the
probabilistic :func:`is_zero` test instead.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Union

__all__ = [
    "Expr",
    "ExprError",
    "DomainError",
    "UnboundSymbolError",
    "num",
    "sym",
    "add",
    "mul",
    "pow_",
    "call",
    "sqrt",
    "sin",
    "cos",
    "exp",
    "log",
    "diff",
    "simplify",
    "substitute",
    "evaluate",
    "is_zero",
    "free_symbols",
    "to_sexpr",
    "compile_exprs",
    "ZERO",
    "ONE",
]

NUM = "num"
SYM = "sym"
ADD = "add"
MUL = "mul"
POW = "pow"
CALL = "call"

_FUNCTIONS = ("sin", "cos", "exp", "log")

Scalar = Union[int, float, Fraction]
ExprLike = Union["Expr", int, float, Fraction]


class ExprError(Exception):
    """Base class for expression errors."""


class DomainError(ExprError):
    """Evaluation left the domain of an elementary function."""


class UnboundSymbolError(ExprError):
    """A free symbol had no binding during evaluation."""


class Expr:
    """A node of a canonical expression tree.

    Do not construct directly; use :func:`num`, :func:`sym`, :func:`add`,
    :func:`mul`, :func:`pow_`, :func:`call` or the arithmetic operators,
    all of which canonicalize.
    """

    __slots__ = ("kind", "value", "args", "_hash", "_key")

    def __init__(self, kind: str, value, args: tuple):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):  # pragma: no cover - defensive
        raise AttributeError("Expr is immutable")

    # -- identity ---------------------------------------------------------

    def _value_tag(self):
        if self.kind == NUM:
            return (type(self.value).__name__, self.value)
        return self.value

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return (
            self.kind == other.kind
            and self._value_tag() == other._value_tag()
            and self.args == other.args
        )

    def __ne__(self, other):
        res = self.__eq__(other)
        return res if res is NotImplemented else not res

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.kind, self._value_tag(), self.args))
            object.__setattr__(self, "_hash", h)
        return h

    # -- ordering key for canonical child sorting -------------------------

    def key(self):
        k = self._key
        if k is None:
            if self.kind == NUM:
                v = self.value
                try:
                    f = float(v)
                except OverflowError:
                    f = math.inf if v > 0 else -math.inf
                k = (0, f, 0 if isinstance(v, Fraction) else 1)
            elif self.kind == SYM:
                k = (1, self.value)
            elif self.kind == CALL:
                k = (2, self.value, self.args[0].key())
            elif self.kind == POW:
                k = (3, self.args[0].key(), (self.value.numerator, self.value.denominator))
            elif self.kind == MUL:
                k = (4, len(self.args), tuple(a.key() for a in self.args))
            else:
                k = (5, len(self.args), tuple(a.key() for a in self.args))
            object.__setattr__(self, "_key", k)
        return k

    # -- arithmetic sugar --------------------------------------------------

    def __add__(self, other: ExprLike) -> "Expr":
        return add(self, _as_expr(other))

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return mul(num(-1), self)

    def __sub__(self, other: ExprLike) -> "Expr":
        return add(self, -_as_expr(other))

    def __rsub__(self, other: ExprLike) -> "Expr":
        return add(_as_expr(other), -self)

    def __mul__(self, other: ExprLike) -> "Expr":
        return mul(self, _as_expr(other))

    __rmul__ = __mul__

    def __truediv__(self, other: ExprLike) -> "Expr":
        return mul(self, pow_(_as_expr(other), -1))

    def __rtruediv__(self, other: ExprLike) -> "Expr":
        return mul(_as_expr(other), pow_(self, -1))

    def __pow__(self, e) -> "Expr":
        return pow_(self, e)

    def __repr__(self):
        return to_sexpr(self)

    # -- convenience -------------------------------------------------------

    def is_num(self) -> bool:
        return self.kind == NUM

    def is_exact_zero(self) -> bool:
        return self.kind == NUM and self.value == 0

    def atoms(self) -> Iterable["Expr"]:
        stack = [self]
        while stack:
            e = stack.pop()
            yield e
            stack.extend(e.args)


def _as_expr(x: ExprLike) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction, float)):
        return num(x)
    raise TypeError(f"cannot interpret {x!r} as an expression")


# ---------------------------------------------------------------------------
# canonical constructors
# ---------------------------------------------------------------------------


def num(v: Scalar) -> Expr:
    """A numeric constant: exact ``Fraction`` for ints/rationals, float otherwise."""
    if isinstance(v, bool):
        raise TypeError("bool is not a number")
    if isinstance(v, int):
        v = Fraction(v)
    elif isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite constant {v!r}")
    elif not isinstance(v, Fraction):
        raise TypeError(f"unsupported constant type {type(v).__name__}")
    return Expr(NUM, v, ())


def sym(name: str) -> Expr:
    """A named coordinate symbol."""
    if not name or not isinstance(name, str):
        raise ValueError(f"bad symbol name {name!r}")
    return Expr(SYM, name, ())


def _split_coeff(t: Expr):
    """Split a canonical term into (numeric coefficient, monomial)."""
    if t.kind == MUL and t.args[0].kind == NUM:
        rest = t.args[1:]
        mono = rest[0] if len(rest) == 1 else Expr(MUL, None, rest)
        return t.args[0].value, mono
    return Fraction(1), t


def add(*terms: ExprLike) -> Expr:
    """Canonical sum: flattened, like terms collected, constants folded."""
    const: Scalar = Fraction(0)
    acc: dict = {}
    order: list = []
    stack = [_as_expr(t) for t in reversed(terms)]
    while stack:
        t = stack.pop()
        if t.kind == ADD:
            stack.extend(reversed(t.args))
        elif t.kind == NUM:
            const = const + t.value
        else:
            c, mono = _split_coeff(t)
            if mono in acc:
                acc[mono] = acc[mono] + c
            else:
                acc[mono] = c
                order.append(mono)
    out = []
    for mono in sorted(order, key=Expr.key):
        c = acc[mono]
        if c == 0:
            continue
        if c == 1 and isinstance(c, Fraction):
            out.append(mono)
        else:
            out.append(mul(num(c), mono))
    if const != 0:
        out.insert(0, num(const))
    if not out:
        return num(0)
    if len(out) == 1:
        return out[0]
    return Expr(ADD, None, tuple(out))


def mul(*factors: ExprLike) -> Expr:
    """Canonical product: flattened, like bases collected into powers."""
    coeff: Scalar = Fraction(1)
    powers: dict = {}
    order: list = []
    stack = [_as_expr(f) for f in reversed(factors)]
    while stack:
        f = stack.pop()
        if f.kind == MUL:
            stack.extend(reversed(f.args))
        elif f.kind == NUM:
            coeff = coeff * f.value
        else:
            if f.kind == POW:
                base, e = f.args[0], f.value
            else:
                base, e = f, Fraction(1)
            if base in powers:
                powers[base] = powers[base] + e
            else:
                powers[base] = e
                order.append(base)
    if coeff == 0:
        return num(0)
    out = []
    folded = False
    for base in sorted(order, key=Expr.key):
        e = powers[base]
        if e == 0:
            continue
        f = pow_(base, e)
        if e != 1 and not (f.kind == POW and f.value == e and f.args[0] == base):
            folded = True  # pow_ simplified (combined, distributed, or folded)
        out.append(f)
    if folded:
        return mul(num(coeff), *out)
    # distribute over plain sum factors so that sums stay fully expanded;
    # powers of sums (exponent != 1) remain atomic factors
    sums = [f for f in out if f.kind == ADD]
    if sums:
        rest = [f for f in out if f.kind != ADD]
        terms = [num(coeff)]
        for s in sums:
            terms = [mul(t, a) for t in terms for a in s.args]
        return add(*[mul(t, *rest) for t in terms])
    if not out:
        return num(coeff)
    if coeff != 1:
        out.insert(0, num(coeff))
    if len(out) == 1:
        return out[0]
    return Expr(MUL, None, tuple(out))


def _iroot(n: int, k: int):
    """Exact integer k-th root of n >= 0, or None."""
    if n in (0, 1):
        return n
    r = round(n ** (1.0 / k))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand**k == n:
            return cand
    return None


def pow_(base: ExprLike, exponent) -> Expr:
    """Canonical power with an exact integer or rational exponent."""
    base = _as_expr(base)
    if isinstance(exponent, float):
        raise TypeError("exponent must be an exact integer or rational")
    e = Fraction(exponent)
    if e == 0:
        return num(1)
    if e == 1:
        return base
    if base.kind == NUM:
        v = base.value
        if isinstance(v, float):
            if v < 0.0 and e.denominator != 1:
                return Expr(POW, e, (base,))
            if v == 0.0 and e < 0:
                return Expr(POW, e, (base,))
            try:
                return num(v ** float(e))
            except (OverflowError, ValueError):
                return Expr(POW, e, (base,))
        if e.denominator == 1:
            if v == 0 and e < 0:
                return Expr(POW, e, (base,))
            return num(v ** e.numerator)
        if v >= 0:
            rn = _iroot(v.numerator, e.denominator)
            rd = _iroot(v.denominator, e.denominator)
            if rn is not None and rd is not None and rd != 0:
                return num(Fraction(rn, rd) ** e.numerator)
        return Expr(POW, e, (base,))
    if base.kind == POW and e.denominator == 1:
        return pow_(base.args[0], base.value * e)
    if base.kind == MUL and e.denominator == 1:
        return mul(*[pow_(f, e) for f in base.args])
    return Expr(POW, e, (base,))


def call(fn: str, arg: ExprLike) -> Expr:
    """Elementary function application, one of sin, cos, exp, log."""
    if fn == "sqrt":
        return sqrt(arg)
    if fn not in _FUNCTIONS:
        raise ValueError(f"unknown function {fn!r}")
    arg = _as_expr(arg)
    if arg.kind == NUM:
        v = arg.value
        if isinstance(v, float):
            return num(_apply_fn(fn, v))
        if v == 0 and fn in ("sin", "cos", "exp"):
            return num(1 if fn in ("cos", "exp") else 0)
        if v == 1 and fn == "log":
            return num(0)
    return Expr(CALL, fn, (arg,))


def sqrt(arg: ExprLike) -> Expr:
    return pow_(_as_expr(arg), Fraction(1, 2))


def sin(arg: ExprLike) -> Expr:
    return call("sin", arg)


def cos(arg: ExprLike) -> Expr:
    return call("cos", arg)


def exp(arg: ExprLike) -> Expr:
    return call("exp", arg)


def log(arg: ExprLike) -> Expr:
    return call("log", arg)


ZERO = num(0)
ONE = num(1)


# ---------------------------------------------------------------------------
# core operations
# ---------------------------------------------------------------------------


def simplify(e: Expr) -> Expr:
    """Rebuild into canonical form.  Idempotent; structural zero only."""
    if e.kind in (NUM, SYM):
        return e
    if e.kind == ADD:
        return add(*[simplify(a) for a in e.args])
    if e.kind == MUL:
        return mul(*[simplify(a) for a in e.args])
    if e.kind == POW:
        return pow_(simplify(e.args[0]), e.value)
    return call(e.value, simplify(e.args[0]))


_DIFF_CACHE: dict = {}


def diff(e: Expr, name: str) -> Expr:
    """Partial derivative with respect to the symbol ``name``.

    All symbols are treated as independent; any convention weighting for
    symmetric jet coordinates is applied by the chart layer on top of this.
    """
    key = (e, name)
    hit = _DIFF_CACHE.get(key)
    if hit is not None:
        return hit
    if e.kind == NUM:
        out = ZERO
    elif e.kind == SYM:
        out = ONE if e.value == name else ZERO
    elif e.kind == ADD:
        out = add(*[diff(a, name) for a in e.args])
    elif e.kind == MUL:
        parts = []
        for i, a in enumerate(e.args):
            da = diff(a, name)
            if da.is_exact_zero():
                continue
            parts.append(mul(*(e.args[:i] + (da,) + e.args[i + 1 :])))
        out = add(*parts) if parts else ZERO
    elif e.kind == POW:
        b = e.args[0]
        db = diff(b, name)
        if db.is_exact_zero():
            out = ZERO
        else:
            out = mul(num(e.value), pow_(b, e.value - 1), db)
    else:
        a = e.args[0]
        da = diff(a, name)
        if da.is_exact_zero():
            out = ZERO
        elif e.value == "sin":
            out = mul(call("cos", a), da)
        elif e.value == "cos":
            out = mul(num(-1), call("sin", a), da)
        elif e.value == "exp":
            out = mul(e, da)
        else:  # log
            out = mul(pow_(a, -1), da)
    _DIFF_CACHE[key] = out
    return out


def substitute(e: Expr, mapping: Mapping[str, ExprLike]) -> Expr:
    """Simultaneous substitution of symbols by expressions, then canonicalize."""
    repl = {k: _as_expr(v) for k, v in mapping.items()}
    memo: dict = {}

    def rec(x: Expr) -> Expr:
        got = memo.get(x)
        if got is not None:
            return got
        if x.kind == SYM:
            out = repl.get(x.value, x)
        elif x.kind == NUM:
            out = x
        elif x.kind == ADD:
            out = add(*[rec(a) for a in x.args])
        elif x.kind == MUL:
            out = mul(*[rec(a) for a in x.args])
        elif x.kind == POW:
            out = pow_(rec(x.args[0]), x.value)
        else:
            out = call(x.value, rec(x.args[0]))
        memo[x] = out
        return out

    return rec(e)


def _apply_fn(fn: str, v: float) -> float:
    if fn == "sin":
        return math.sin(v)
    if fn == "cos":
        return math.cos(v)
    if fn == "exp":
        try:
            return math.exp(v)
        except OverflowError:
            raise DomainError(f"exp overflow at {v!r}") from None
    if v <= 0.0:
        raise DomainError(f"log of non-positive value {v!r}")
    return math.log(v)


Bindings = Mapping[str, float]


def evaluate(e: Expr, bindings: Bindings) -> float:
    """Evaluate to an IEEE double.  Raises on unbound symbols or domain errors."""
    return _eval(e, bindings, None)


def _eval(e: Expr, b: Bindings, mag: list | None) -> float:
    if e.kind == NUM:
        v = float(e.value)
    elif e.kind == SYM:
        try:
            v = float(b[e.value])
        except KeyError:
            raise UnboundSymbolError(f"unbound symbol {e.value!r}") from None
    elif e.kind == ADD:
        v = 0.0
        for a in e.args:
            v += _eval(a, b, mag)
    elif e.kind == MUL:
        v = 1.0
        for a in e.args:
            v *= _eval(a, b, mag)
    elif e.kind == POW:
        base = _eval(e.args[0], b, mag)
        q = e.value
        if base == 0.0 and q < 0:
            raise DomainError("zero to a negative power")
        if base < 0.0:
            if q.denominator != 1:
                raise DomainError(f"negative base {base!r} under rational power {q}")
            v = base ** q.numerator
        else:
            v = base ** float(q)
    else:
        v = _apply_fn(e.value, _eval(e.args[0], b, mag))
    if not math.isfinite(v):
        raise DomainError(f"non-finite intermediate value in {e.kind} node")
    if mag is not None and abs(v) > mag[0]:
        mag[0] = abs(v)
    return v


def free_symbols(e: Expr) -> set[str]:
    out = set()
    for node in e.atoms():
        if node.kind == SYM:
            out.add(node.value)
    return out


def is_zero(
    e: Expr,
    symbols: Iterable[str] | None = None,
    trials: int = 100,
    tol: float = 1e-10,
    seed: int = 0,
    low: float = -2.0,
    high: float = 2.0,
) -> bool:
    """Probabilistic zero test by evaluation at random points.

    Each trial draws every symbol uniformly from ``[low, high]`` and accepts
    if ``|value| <= tol * (1 + M)`` where ``M`` is the largest magnitude seen
    among subterm values (the natural cancellation scale).  Domain violations
    trigger a resample, capped at 100 attempts per trial.  Deterministic under
    a fixed seed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if symbols is None:
        names = sorted(free_symbols(e))
    elif hasattr(symbols, "names"):  # accept a chart
        names = sorted(set(symbols.names()) & free_symbols(e))
    else:
        names = sorted(set(symbols))
    rng = random.Random(seed)
    for _ in range(trials):
        for attempt in range(100):
            b = {n: rng.uniform(low, high) for n in names}
            mag = [0.0]
            try:
                v = _eval(e, b, mag)
            except DomainError:
                continue
            except UnboundSymbolError:
                raise
            if abs(v) <= tol * (1.0 + mag[0]):
                break
            return False
        else:
            raise DomainError("could not find an admissible sample point in 100 attempts")
    return True


# ---------------------------------------------------------------------------
# serialization and compilation
# ---------------------------------------------------------------------------


def _num_str(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return repr(v)


def to_sexpr(e: Expr) -> str:
    """Deterministic prefix serialization with sorted children."""
    if e.kind == NUM:
        return _num_str(e.value)
    if e.kind == SYM:
        return e.value
    if e.kind == ADD:
        return "(+ " + " ".join(to_sexpr(a) for a in e.args) + ")"
    if e.kind == MUL:
        return "(* " + " ".join(to_sexpr(a) for a in e.args) + ")"
    if e.kind == POW:
        return f"(pow {to_sexpr(e.args[0])} {_num_str(e.value)})"
    return f"({e.value} {to_sexpr(e.args[0])})"


def compile_exprs(exprs: list[Expr], arg_names: list[str]) -> Callable[..., list[float]]:
    """Compile expressions into one fast positional-argument function.

    Returns ``f(*values) -> [float, ...]`` with ``values`` matching
    ``arg_names``.  Used on hot numeric paths (integration, quadrature).
    """
    index = {n: i for i, n in enumerate(arg_names)}
    pieces: list[str] = []

    def emit(e: Expr) -> str:
        if e.kind == NUM:
            v = e.value
            return repr(float(v)) if isinstance(v, float) or v.denominator > 1 else repr(v.numerator)
        if e.kind == SYM:
            if e.value not in index:
                raise UnboundSymbolError(f"unbound symbol {e.value!r} in compiled expression")
            return f"_a[{index[e.value]}]"
        if e.kind == ADD:
            return "(" + "+".join(emit(a) for a in e.args) + ")"
        if e.kind == MUL:
            return "(" + "*".join(emit(a) for a in e.args) + ")"
        if e.kind == POW:
            q = e.value
            if q.denominator == 1:
                return f"({emit(e.args[0])})**({q.numerator})"
            return f"({emit(e.args[0])})**({q.numerator}/{q.denominator})"
        return f"_m.{e.value}({emit(e.args[0])})"

    for e in exprs:
        pieces.append(emit(e))
    src = "def _f(*_a):\n    return [" + ", ".join(pieces) + "]\n"
    ns: dict = {"_m": math}
    exec(src, ns)  # noqa: S102 - generated from a closed expression grammar
    return ns["_f"]
