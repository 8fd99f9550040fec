"""Jet charts, composite layers, total derivatives and prolongations.

A :class:`JetChart` declares base coordinates, fiber coordinates and their
derivative coordinates up to a given order, with symmetric multi-indices
stored once per sorted tuple.  A chart may carry a composite layer of
perturbation coordinates (named ``X`` by default) with mixed derivatives in
both base and fiber directions, which is where linearized fields live.

Derivative symbols are plain named symbols of the expression core; the chart
owns the naming scheme, the symmetrized-partial convention and the total
derivative rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Callable, Iterable, Sequence

from . import expr as ex
from .expr import Expr

__all__ = [
    "ChartError",
    "ChartSymbol",
    "JetChart",
    "make_chart",
    "composite_extend",
    "total_derivative",
    "prolong_vertical_field",
    "composite_section_map",
    "SectionSamples",
    "numeric_jet",
]

FD_STEP = 1e-4  # central-difference step for tabulated sections, O(h^2)


class ChartError(Exception):
    pass


def _multiplicity(idx: tuple) -> int:
    """Distinct permutations of a sorted multi-index."""
    n = math.factorial(len(idx))
    for v in set(idx):
        n //= math.factorial(idx.count(v))
    return n


@dataclass(frozen=True)
class ChartSymbol:
    """A chart coordinate: base, fiber jet, parameter, or composite jet."""

    name: str
    role: str  # 'base' | 'fiber' | 'z' | 'param'
    index: int
    dbase: tuple[int, ...] = ()
    dfiber: tuple[int, ...] = ()

    @property
    def order(self) -> int:
        return len(self.dbase) + len(self.dfiber)

    @property
    def multiplicity(self) -> int:
        return _multiplicity(self.dbase) * _multiplicity(self.dfiber)


def _suffix(names: Sequence[str]) -> str:
    if all(len(n) == 1 for n in names):
        return "".join(names)
    return ",".join(names)


class JetChart:
    """Coordinates of a jet prolongation, optionally with a composite layer."""

    def __init__(
        self,
        base: Sequence[str],
        fiber: Sequence[str],
        order: int,
        params: Sequence[str] = (),
        z_names: Sequence[str] | None = None,
        z_order: int = 0,
        aliases: dict[str, str] | None = None,
    ):
        if order < 1 or order > 4:
            raise ChartError(f"unsupported jet order {order} (must be 1..4)")
        if len(base) < 1 or len(fiber) < 1:
            raise ChartError("base and fiber dimensions must be >= 1")
        self.base = tuple(base)
        self.fiber = tuple(fiber)
        self.order = order
        self.params = tuple(params)
        self.z_names = tuple(z_names) if z_names is not None else None
        self.z_order = z_order if z_names is not None else 0
        self.aliases = dict(aliases or {})
        self._symbols: dict[str, ChartSymbol] = {}
        self._jet_names: dict[tuple, str] = {}
        self._build()

    # -- construction ------------------------------------------------------

    def _register(self, s: ChartSymbol):
        if s.name in self._symbols:
            raise ChartError(f"duplicate symbol name {s.name!r}")
        self._symbols[s.name] = s

    def _build(self):
        for mu, nm in enumerate(self.base):
            self._register(ChartSymbol(nm, "base", mu))
        for i, nm in enumerate(self.fiber):
            self._register(ChartSymbol(nm, "fiber", i))
            self._jet_names[("fiber", i, (), ())] = nm
        for nm in self.params:
            self._register(ChartSymbol(nm, "param", 0))
        for k in range(1, self.order + 1):
            for i, nm in enumerate(self.fiber):
                for idx in combinations_with_replacement(range(len(self.base)), k):
                    name = f"{nm}_{_suffix([self.base[m] for m in idx])}"
                    self._register(ChartSymbol(name, "fiber", i, dbase=idx))
                    self._jet_names[("fiber", i, idx, ())] = name
        if self.z_names is not None:
            if len(self.z_names) != len(self.fiber):
                raise ChartError("one composite coordinate per fiber coordinate required")
            dirs = [("b", mu) for mu in range(len(self.base))] + [
                ("f", i) for i in range(len(self.fiber))
            ]
            for a, nm in enumerate(self.z_names):
                self._register(ChartSymbol(nm, "z", a))
                self._jet_names[("z", a, (), ())] = nm
            for k in range(1, self.z_order + 1):
                for a, nm in enumerate(self.z_names):
                    for combo in combinations_with_replacement(range(len(dirs)), k):
                        db = tuple(dirs[c][1] for c in combo if dirs[c][0] == "b")
                        df = tuple(dirs[c][1] for c in combo if dirs[c][0] == "f")
                        names = [self.base[m] for m in db] + [self.fiber[j] for j in df]
                        name = f"{nm}_{_suffix(names)}"
                        self._register(ChartSymbol(name, "z", a, dbase=db, dfiber=df))
                        self._jet_names[("z", a, db, df)] = name

    # -- lookup ------------------------------------------------------------

    def resolve(self, name: str) -> str:
        return self.aliases.get(name, name)

    def symbol(self, name: str) -> ChartSymbol:
        s = self._symbols.get(self.resolve(name))
        if s is None:
            raise ChartError(f"unknown symbol {name!r} in chart")
        return s

    def has(self, name: str) -> bool:
        return self.resolve(name) in self._symbols

    def sym(self, name: str) -> Expr:
        return ex.sym(self.symbol(name).name)

    def names(self) -> list[str]:
        return list(self._symbols)

    def base_index(self, mu) -> int:
        if isinstance(mu, str):
            try:
                return self.base.index(mu)
            except ValueError:
                raise ChartError(f"unknown base coordinate {mu!r}") from None
        if not 0 <= mu < len(self.base):
            raise ChartError(f"base index {mu} out of range")
        return mu

    def fiber_index(self, i) -> int:
        if isinstance(i, str):
            try:
                return self.fiber.index(i)
            except ValueError:
                raise ChartError(f"unknown fiber coordinate {i!r}") from None
        if not 0 <= i < len(self.fiber):
            raise ChartError(f"fiber index {i} out of range")
        return i

    def jet_name(self, i, dbase: Iterable = ()) -> str:
        i = self.fiber_index(i)
        idx = tuple(sorted(self.base_index(m) for m in dbase))
        name = self._jet_names.get(("fiber", i, idx, ()))
        if name is None:
            raise ChartError(
                f"jet of {self.fiber[i]!r} of order {len(idx)} exceeds chart order {self.order}"
            )
        return name

    def jet(self, i, *dbase) -> Expr:
        return ex.sym(self.jet_name(i, dbase))

    def z_jet_name(self, a: int, dbase: tuple = (), dfiber: tuple = ()) -> str:
        db = tuple(sorted(dbase))
        df = tuple(sorted(dfiber))
        name = self._jet_names.get(("z", a, db, df))
        if name is None:
            raise ChartError(f"composite jet ({a}, {db}, {df}) not in chart")
        return name

    def z_jet(self, a: int, dbase: tuple = (), dfiber: tuple = ()) -> Expr:
        return ex.sym(self.z_jet_name(a, dbase, dfiber))

    def z_symbols(self) -> list[ChartSymbol]:
        return [s for s in self._symbols.values() if s.role == "z"]

    def validate(self, e: Expr, max_order: int | None = None, allow_z: bool = True):
        """Check that every free symbol is registered (and within order bounds)."""
        for name in ex.free_symbols(e):
            s = self._symbols.get(name)
            if s is None:
                raise ChartError(f"symbol {name!r} is not registered in the chart")
            if not allow_z and s.role == "z":
                raise ChartError(f"composite symbol {name!r} not allowed here")
            if max_order is not None and s.role == "fiber" and s.order > max_order:
                raise ChartError(
                    f"symbol {name!r} has jet order {s.order} > allowed {max_order}"
                )

    def jet_order_of(self, e: Expr) -> int:
        k = 0
        for name in ex.free_symbols(e):
            s = self._symbols.get(name)
            if s is not None and s.role in ("fiber", "z"):
                k = max(k, s.order)
        return k

    # -- derived charts ------------------------------------------------------

    def extended(self, order: int) -> "JetChart":
        """Same coordinates with derivative symbols up to a higher order."""
        return JetChart(
            self.base,
            self.fiber,
            max(order, self.order),
            params=self.params,
            z_names=self.z_names,
            z_order=self.z_order,
            aliases=self.aliases,
        )

    def with_fields(self, names: Sequence[str], order: int | None = None) -> "JetChart":
        """Plain chart adjoining extra fiber fields of the base alone.

        Used for linearization checks where a perturbation depends on base
        coordinates only and carries ordinary base jets.
        """
        return JetChart(
            self.base,
            tuple(self.fiber) + tuple(names),
            order if order is not None else self.order,
            params=self.params,
            aliases=self.aliases,
        )

    # -- calculus ------------------------------------------------------------

    def partial(self, e: Expr, s) -> Expr:
        """Symmetrized partial derivative with respect to a chart symbol.

        For a repeated-index derivative coordinate stored once per sorted
        multi-index, the raw coefficient is divided by the number of distinct
        index orderings, so that chain-rule sums over ordered index tuples
        reproduce the usual summation convention.
        """
        name = s if isinstance(s, str) else s.value if isinstance(s, Expr) else s.name
        cs = self.symbol(name)
        raw = ex.diff(e, cs.name)
        m = cs.multiplicity
        if m == 1:
            return raw
        return ex.mul(ex.num(Fraction(1, m)), raw)

    def partial_raw(self, e: Expr, s) -> Expr:
        """Plain derivative treating the stored symbol as independent."""
        name = s if isinstance(s, str) else s.value if isinstance(s, Expr) else s.name
        return ex.diff(e, self.symbol(name).name)

    def _sym_derivative(self, s: ChartSymbol, mu: int) -> Expr:
        if s.role == "base":
            return ex.ONE if s.index == mu else ex.ZERO
        if s.role == "param":
            return ex.ZERO
        if s.role == "fiber":
            idx = tuple(sorted(s.dbase + (mu,)))
            if len(idx) > self.order:
                raise ChartError(
                    f"total derivative of {s.name!r} exceeds chart order {self.order}"
                )
            return ex.sym(self._jet_names[("fiber", s.index, idx, ())])
        # composite: d_mu z = z_mu + y^k_mu z_k, applied to any mixed slot
        db = tuple(sorted(s.dbase + (mu,)))
        if len(db) + len(s.dfiber) > self.z_order:
            raise ChartError(
                f"total derivative of {s.name!r} exceeds composite order {self.z_order}"
            )
        terms = [ex.sym(self._jet_names[("z", s.index, db, s.dfiber)])]
        for k in range(len(self.fiber)):
            df = tuple(sorted(s.dfiber + (k,)))
            terms.append(
                ex.mul(
                    ex.sym(self._jet_names[("fiber", k, (mu,), ())]),
                    ex.sym(self._jet_names[("z", s.index, s.dbase, df)]),
                )
            )
        return ex.add(*terms)

    def total_derivative(self, e: Expr, mu) -> Expr:
        """Total derivative along base direction ``mu`` (composite-aware)."""
        mu = self.base_index(mu)
        memo: dict = {}

        def rec(x: Expr) -> Expr:
            got = memo.get(x)
            if got is not None:
                return got
            if x.kind == ex.NUM:
                out = ex.ZERO
            elif x.kind == ex.SYM:
                out = self._sym_derivative(self.symbol(x.value), mu)
            elif x.kind == ex.ADD:
                out = ex.add(*[rec(a) for a in x.args])
            elif x.kind == ex.MUL:
                parts = []
                for i, a in enumerate(x.args):
                    da = rec(a)
                    if da.is_exact_zero():
                        continue
                    parts.append(ex.mul(*(x.args[:i] + (da,) + x.args[i + 1 :])))
                out = ex.add(*parts) if parts else ex.ZERO
            elif x.kind == ex.POW:
                b = x.args[0]
                db = rec(b)
                out = (
                    ex.ZERO
                    if db.is_exact_zero()
                    else ex.mul(ex.num(x.value), ex.pow_(b, x.value - 1), db)
                )
            else:
                a = x.args[0]
                da = rec(a)
                if da.is_exact_zero():
                    out = ex.ZERO
                elif x.value == "sin":
                    out = ex.mul(ex.call("cos", a), da)
                elif x.value == "cos":
                    out = ex.mul(ex.num(-1), ex.call("sin", a), da)
                elif x.value == "exp":
                    out = ex.mul(x, da)
                else:
                    out = ex.mul(ex.pow_(a, -1), da)
            memo[x] = out
            return out

        return rec(e)

    def total_derivative_multi(self, e: Expr, dbase: Iterable) -> Expr:
        for mu in dbase:
            e = self.total_derivative(e, mu)
        return e

    def sorted_multi_indices(self, max_order: int, include_empty: bool = True):
        out = [()] if include_empty else []
        for k in range(1, max_order + 1):
            out.extend(combinations_with_replacement(range(len(self.base)), k))
        return out


def make_chart(
    m: int,
    n: int,
    order: int,
    base: Sequence[str] | None = None,
    fiber: Sequence[str] | None = None,
    params: Sequence[str] = (),
    aliases: dict[str, str] | None = None,
) -> JetChart:
    """Plain jet chart with ``m`` base and ``n`` fiber coordinates."""
    if base is None:
        base = ("t",) if m == 1 else ("t", "x") if m == 2 else tuple(f"x{k}" for k in range(m))
    if fiber is None:
        fiber = ("y",) if n == 1 else tuple(f"y{k + 1}" for k in range(n))
    if len(base) != m or len(fiber) != n:
        raise ChartError("coordinate name lists do not match the declared dimensions")
    return JetChart(base, fiber, order, params=params, aliases=aliases)


def composite_extend(chart: JetChart, z_order: int = 2) -> JetChart:
    """Adjoin the composite perturbation layer with mixed jets.

    Adds one coordinate per fiber coordinate (named ``X``, or ``X1..Xn``)
    together with all mixed base/fiber derivative symbols up to ``z_order``.
    """
    if chart.z_names is not None:
        raise ChartError("chart already carries a composite layer")
    n = len(chart.fiber)
    z_names = ("X",) if n == 1 else tuple(f"X{k + 1}" for k in range(n))
    return JetChart(
        chart.base,
        chart.fiber,
        chart.order,
        params=chart.params,
        z_names=z_names,
        z_order=z_order,
        aliases=chart.aliases,
    )


def total_derivative(e: Expr, mu, chart: JetChart) -> Expr:
    return chart.total_derivative(e, mu)


def prolong_vertical_field(
    components: Sequence[Expr], order: int, chart: JetChart
) -> dict[str, Expr]:
    """Prolong a vertical field given by components over (base, fiber).

    Returns the substitution map from perturbation jet names ``X``, ``X_t``,
    ``X_tt``, ... to the total derivatives of the components on the plain
    chart; keys follow the composite naming scheme restricted to base
    derivatives.  Raises if a component depends on derivative coordinates.
    """
    if len(components) != len(chart.fiber):
        raise ChartError("one component per fiber coordinate required")
    if order < 1 or order > 4:
        raise ChartError(f"unsupported prolongation order {order}")
    if order > chart.order:
        raise ChartError(
            f"prolongation order {order} exceeds chart order {chart.order}"
        )
    for c in components:
        for name in ex.free_symbols(c):
            s = chart.symbol(name)
            if s.role == "fiber" and s.order > 0:
                raise ChartError(
                    f"vertical field component depends on jet symbol {name!r}"
                )
            if s.role == "z":
                raise ChartError("vertical field components live on (base, fiber) only")
    n = len(chart.fiber)
    z_names = ("X",) if n == 1 else tuple(f"X{k + 1}" for k in range(n))
    out: dict[str, Expr] = {}
    level: dict[tuple, list[Expr]] = {(): list(components)}
    for i in range(n):
        out[z_names[i]] = components[i]
    for k in range(1, order + 1):
        for idx in combinations_with_replacement(range(len(chart.base)), k):
            head, last = idx[:-1], idx[-1]
            src = level[head]
            level[idx] = [chart.total_derivative(src[i], last) for i in range(n)]
            suffix = _suffix([chart.base[m] for m in idx])
            for i in range(n):
                out[f"{z_names[i]}_{suffix}"] = level[idx][i]
    return out


def composite_section_map(
    components: Sequence[Expr], comp_chart: JetChart
) -> dict[str, Expr]:
    """Substitution sending composite jet symbols to partials of components.

    Realizes evaluation along a composite section: the slot holding the
    mixed derivative of the perturbation in base directions ``B`` and fiber
    directions ``F`` receives the corresponding partial derivative of the
    closed-form component.
    """
    if comp_chart.z_names is None:
        raise ChartError("chart has no composite layer")
    out: dict[str, Expr] = {}
    for s in comp_chart.z_symbols():
        e = components[s.index]
        for mu in s.dbase:
            e = ex.diff(e, comp_chart.base[mu])
        for i in s.dfiber:
            e = ex.diff(e, comp_chart.fiber[i])
        out[s.name] = e
    return out


# ---------------------------------------------------------------------------
# sections and numeric jets
# ---------------------------------------------------------------------------


class SectionSamples:
    """A sampled configuration: values and derivatives along the base.

    Three backings are supported: closed-form expressions over the base
    coordinate (derivatives exact), a callable with optional analytic
    derivative callables, or a tabulated grid (central differences,
    accuracy O(h^2)).  Numeric backings support a one-dimensional base.
    """

    def __init__(self, chart: JetChart, kind: str, payload):
        self.chart = chart
        self.kind = kind
        self._payload = payload

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_exprs(cls, chart: JetChart, exprs: Sequence[Expr]) -> "SectionSamples":
        if len(exprs) != len(chart.fiber):
            raise ChartError("one expression per fiber coordinate required")
        for e in exprs:
            for name in ex.free_symbols(e):
                s = chart.symbol(name)
                if s.role not in ("base", "param"):
                    raise ChartError(
                        f"section expression may depend on base coordinates only, got {name!r}"
                    )
        return cls(chart, "exprs", {"exprs": list(exprs), "cache": {}})

    @classmethod
    def from_callable(
        cls,
        chart: JetChart,
        fn: Callable[[float], Sequence[float]],
        derivatives: Sequence[Callable[[float], Sequence[float]]] = (),
    ) -> "SectionSamples":
        if len(chart.base) != 1:
            raise ChartError("callable sections require a one-dimensional base")
        return cls(chart, "callable", {"fn": fn, "derivs": list(derivatives)})

    @classmethod
    def from_table(cls, chart: JetChart, ts, ys) -> "SectionSamples":
        import numpy as np

        if len(chart.base) != 1:
            raise ChartError("tabulated sections require a one-dimensional base")
        ts = np.asarray(ts, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if ts.ndim != 1 or len(ts) < 5:
            raise ChartError("need at least 5 samples")
        if ys.shape != (len(ts), len(chart.fiber)):
            raise ChartError("table shape does not match the chart fiber")
        h = float(ts[1] - ts[0])
        if not np.allclose(np.diff(ts), h, rtol=0, atol=1e-12 * max(1.0, abs(h))):
            raise ChartError("tabulated sections require a uniform grid")
        return cls(chart, "table", {"ts": ts, "ys": ys, "h": h})

    # -- sampling ----------------------------------------------------------

    def _derivative_exprs(self, order: int) -> list[list[Expr]]:
        data = self._payload
        rows = data["cache"].get(order)
        if rows is None:
            rows = [list(data["exprs"])]
            tname = self.chart.base[0] if len(self.chart.base) == 1 else None
            for _ in range(order):
                rows.append([ex.diff(e, tname) for e in rows[-1]])
            data["cache"][order] = rows
        return rows

    def values(self, t: float) -> list[float]:
        return self.jet(t, 0)["__values__"]

    def jet(self, t: float, order: int, params: dict | None = None) -> dict[str, float]:
        """Bindings for all chart symbols at base point ``t`` up to ``order``.

        The special key ``__values__`` carries the bare fiber values.
        """
        c = self.chart
        if order > c.order:
            raise ChartError(f"requested jet order {order} exceeds chart order {c.order}")
        if len(c.base) != 1:
            raise ChartError("numeric jets are supported over a one-dimensional base")
        rows = self._rows(float(t), order)
        b: dict[str, float] = {c.base[0]: float(t)}
        if params:
            b.update(params)
        for k in range(order + 1):
            for i in range(len(c.fiber)):
                idx = tuple([0] * k)
                b[c._jet_names[("fiber", i, idx, ())]] = rows[k][i]
        b["__values__"] = list(rows[0])
        return b

    def _rows(self, t: float, order: int) -> list[list[float]]:
        c = self.chart
        n = len(c.fiber)
        if self.kind == "exprs":
            rows_e = self._derivative_exprs(order)
            tname = c.base[0]
            return [
                [ex.evaluate(rows_e[k][i], {tname: t}) for i in range(n)]
                for k in range(order + 1)
            ]
        if self.kind == "callable":
            data = self._payload
            rows = [list(data["fn"](t))]
            for k in range(1, order + 1):
                if k - 1 < len(data["derivs"]):
                    rows.append(list(data["derivs"][k - 1](t)))
                else:
                    rows.append(self._fd_row(lambda s: data["fn"](s), t, k))
            return rows
        data = self._payload
        ts, ys, h = data["ts"], data["ys"], data["h"]
        j = int(round((t - ts[0]) / h))
        if j < 0 or j >= len(ts) or abs(ts[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ChartError(f"point {t!r} is not on the tabulated grid")
        need = order  # central stencils need `order` neighbours on each side
        if j - need < 0 or j + need >= len(ts):
            raise ChartError(f"point {t!r} too close to the table boundary for order {order}")
        rows = [list(ys[j])]
        if order >= 1:
            rows.append(list((ys[j + 1] - ys[j - 1]) / (2 * h)))
        if order >= 2:
            rows.append(list((ys[j + 1] - 2 * ys[j] + ys[j - 1]) / (h * h)))
        if order >= 3:
            rows.append(list((ys[j + 2] - 2 * ys[j + 1] + 2 * ys[j - 1] - ys[j - 2]) / (2 * h**3)))
        if order >= 4:
            rows.append(
                list((ys[j + 2] - 4 * ys[j + 1] + 6 * ys[j] - 4 * ys[j - 1] + ys[j - 2]) / h**4)
            )
        return rows

    @staticmethod
    def _fd_row(fn, t: float, k: int) -> list[float]:
        h = FD_STEP
        import numpy as np

        if k == 1:
            a, b = np.asarray(fn(t + h), float), np.asarray(fn(t - h), float)
            return list((a - b) / (2 * h))
        if k == 2:
            a = np.asarray(fn(t + h), float)
            b = np.asarray(fn(t), float)
            c = np.asarray(fn(t - h), float)
            return list((a - 2 * b + c) / (h * h))
        raise ChartError("finite-difference jets of callables support order <= 2")

    def check_consistency(self, ts: Iterable[float], tol: float = 1e-5) -> float:
        """Max deviation between stored first derivatives and FD of values."""
        import numpy as np

        worst = 0.0
        for t in ts:
            h = FD_STEP
            v_plus = np.asarray(self._rows(t + h, 0)[0]) if self.kind != "table" else None
            if v_plus is None:
                continue
            v_minus = np.asarray(self._rows(t - h, 0)[0])
            d = np.asarray(self._rows(t, 1)[1])
            worst = max(worst, float(np.max(np.abs((v_plus - v_minus) / (2 * h) - d))))
        if worst > tol:
            raise ChartError(f"section derivatives inconsistent with values: {worst:.3e}")
        return worst


def numeric_jet(s: SectionSamples, x: float, order: int) -> dict[str, float]:
    """Bindings for all jet symbols of the section's chart at base point ``x``."""
    b = s.jet(x, order)
    b.pop("__values__", None)
    return b
