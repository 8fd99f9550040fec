"""Momenta, Euler-Lagrange forms, and the first-variation split.

For a first-order density the field equations are ``E_i = p_i - d_mu p_i^mu``
with ``p_i`` and ``p_i^mu`` the partials of the density with respect to the
fiber coordinate and its first jets; a second-order density adds the
``+ d_munu p_i^munu`` row.  Internally all variational sums run over sorted
multi-indices with raw stored partials, which is equivalent to the ordered
summation convention with symmetrized partials.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import expr as ex
from .charts import ChartError, JetChart, SectionSamples, prolong_vertical_field
from .expr import Expr

__all__ = [
    "Lagrangian",
    "Momenta",
    "EulerLagrangeForm",
    "momenta",
    "euler_lagrange",
    "first_variation",
    "boundary_form",
    "residual",
    "FiberedDiffeo",
    "chart_change_check",
]


@dataclass(frozen=True)
class Lagrangian:
    """A scalar density over a plain jet chart, of order 1 or 2."""

    chart: JetChart
    density: Expr
    order: int

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ChartError(f"Lagrangian order must be 1 or 2, got {self.order}")
        self.chart.validate(self.density, max_order=self.order, allow_z=False)
        if self.chart.order < self.order:
            raise ChartError("chart order is below the Lagrangian order")

    @property
    def m(self) -> int:
        return len(self.chart.base)

    @property
    def n(self) -> int:
        return len(self.chart.fiber)


@dataclass(frozen=True)
class Momenta:
    """Momenta of a density in the symmetrized index convention.

    ``p[i]`` is the partial with respect to the fiber coordinate, ``p1[i][mu]``
    with respect to its first jet, and for order-2 densities ``p2[i][mu][nu]``
    with respect to the symmetric second jet (``p2`` symmetric in mu, nu).
    """

    p: list
    p1: list
    p2: list | None

    def second(self, i: int, mu: int, nu: int) -> Expr:
        if self.p2 is None:
            raise ChartError("no second-order momenta for an order-1 density")
        return self.p2[i][mu][nu]


@dataclass(frozen=True)
class EulerLagrangeForm:
    """Components of the field equations on the order-2k chart."""

    chart: JetChart
    components: list

    def __iter__(self):
        return iter(self.components)


def momenta(L: Lagrangian) -> Momenta:
    c = L.chart
    m, n = L.m, L.n
    p = [c.partial(L.density, c.fiber[i]) for i in range(n)]
    p1 = [[c.partial(L.density, c.jet_name(i, (mu,))) for mu in range(m)] for i in range(n)]
    p2 = None
    if L.order == 2:
        p2 = [
            [[c.partial(L.density, c.jet_name(i, (mu, nu))) for nu in range(m)] for mu in range(m)]
            for i in range(n)
        ]
    return Momenta(p, p1, p2)


def _lagrangian_coefficients(L: Lagrangian) -> dict:
    """Raw stored partials of the density, keyed by (fiber index, sorted multi-index)."""
    c = L.chart
    out = {}
    for i in range(L.n):
        for idx in c.sorted_multi_indices(L.order):
            out[(i, idx)] = c.partial_raw(L.density, c.jet_name(i, idx))
    return out


def euler_lagrange(L: Lagrangian) -> EulerLagrangeForm:
    """Field equation components ``E_i`` on the order-2k extension of the chart."""
    work = L.chart.extended(2 * L.order)
    coeffs = _lagrangian_coefficients(L)
    comps = []
    for i in range(L.n):
        terms = []
        for idx in work.sorted_multi_indices(L.order):
            coef = coeffs[(i, idx)]
            if coef.is_exact_zero():
                continue
            sign = ex.num((-1) ** len(idx))
            terms.append(ex.mul(sign, work.total_derivative_multi(coef, idx)))
        comps.append(ex.add(*terms) if terms else ex.ZERO)
    return EulerLagrangeForm(work, comps)


def first_variation(
    L: Lagrangian,
    X_components: list,
    check: bool = True,
    seed: int = 0,
) -> tuple[Expr, list]:
    """Split the variation along a vertical field into interior and boundary parts.

    Returns ``(E_i X^i, [F^mu])`` with the boundary current satisfying
    ``delta_X L = E_i X^i + d_mu F^mu``; the identity is verified at random
    points when ``check`` is set.
    """
    work = L.chart.extended(2 * L.order)
    m, n = L.m, L.n
    pro = prolong_vertical_field(X_components, min(2 * L.order, 4), work)
    zn = ("X",) if n == 1 else tuple(f"X{k + 1}" for k in range(n))

    def dX(i: int, idx: tuple) -> Expr:
        if not idx:
            return pro[zn[i]]
        from .charts import _suffix

        return pro[f"{zn[i]}_{_suffix([work.base[mu] for mu in idx])}"]

    E = euler_lagrange(L)
    interior = ex.add(*[ex.mul(E.components[i], dX(i, ())) for i in range(n)])

    mom = momenta(L)
    boundary = []
    for mu in range(m):
        terms = []
        for i in range(n):
            terms.append(ex.mul(mom.p1[i][mu], dX(i, ())))
            if L.order == 2:
                for nu in range(m):
                    p2 = mom.p2[i][mu][nu]
                    terms.append(ex.mul(p2, dX(i, (nu,))))
                    terms.append(
                        ex.mul(ex.num(-1), work.total_derivative(p2, nu), dX(i, ()))
                    )
        boundary.append(ex.add(*terms))

    if check:
        coeffs = _lagrangian_coefficients(L)
        delta = ex.add(
            *[
                ex.mul(coeffs[(i, idx)], dX(i, idx))
                for i in range(n)
                for idx in work.sorted_multi_indices(L.order)
            ]
        )
        defect = ex.add(
            delta,
            ex.mul(ex.num(-1), interior),
            *[ex.mul(ex.num(-1), work.total_derivative(boundary[mu], mu)) for mu in range(m)],
        )
        if not ex.is_zero(defect, trials=100, tol=1e-10, seed=seed):
            raise AssertionError("first variation split failed the identity check")
    return interior, boundary


def boundary_form(L: Lagrangian) -> list:
    """Boundary currents F^mu with a formal perturbation adjoined to the chart.

    For order 1 this is ``p_i^mu X^i``; order 2 adds
    ``p_i^{mu nu} d_nu X^i - (d_nu p_i^{mu nu}) X^i``.  The perturbation and
    its jets appear as the fields ``X``/``X1..Xn`` of
    ``L.chart.with_fields(...)``.
    """
    n, m = L.n, L.m
    z_names = ("X",) if n == 1 else tuple(f"X{k + 1}" for k in range(n))
    adj = L.chart.extended(2 * L.order).with_fields(z_names, order=2 * L.order)
    mom = momenta(L)
    work = L.chart.extended(2 * L.order)
    out = []
    for mu in range(m):
        terms = []
        for i in range(n):
            X = adj.sym(z_names[i])
            terms.append(ex.mul(mom.p1[i][mu], X))
            if L.order == 2:
                for nu in range(m):
                    p2 = mom.p2[i][mu][nu]
                    dX = adj.sym(f"{z_names[i]}_{adj.base[nu]}")
                    terms.append(ex.mul(p2, dX))
                    terms.append(ex.mul(ex.num(-1), work.total_derivative(p2, nu), X))
        out.append(ex.add(*terms))
    return out


def residual(E: EulerLagrangeForm, s: SectionSamples, x: float) -> list[float]:
    """Field-equation components evaluated along a section at a base point."""
    order = max(E.chart.jet_order_of(c) for c in E.components) if E.components else 0
    b = s.jet(x, order)
    b.pop("__values__", None)
    return [ex.evaluate(c, b) for c in E.components]


# ---------------------------------------------------------------------------
# chart-change covariance check
# ---------------------------------------------------------------------------


def _mat_inverse(mat: list, size: int) -> tuple[list, Expr]:
    """Symbolic inverse and determinant of a small matrix of expressions."""
    if size == 1:
        det = mat[0][0]
        return [[ex.pow_(det, -1)]], det
    if size == 2:
        a, b = mat[0]
        c, d = mat[1]
        det = ex.add(ex.mul(a, d), ex.mul(ex.num(-1), ex.mul(b, c)))
        inv_det = ex.pow_(det, -1)
        return (
            [
                [ex.mul(d, inv_det), ex.mul(ex.num(-1), b, inv_det)],
                [ex.mul(ex.num(-1), c, inv_det), ex.mul(a, inv_det)],
            ],
            det,
        )
    if size == 3:
        def minor(r, s):
            rows = [i for i in range(3) if i != r]
            cols = [j for j in range(3) if j != s]
            return ex.add(
                ex.mul(mat[rows[0]][cols[0]], mat[rows[1]][cols[1]]),
                ex.mul(ex.num(-1), mat[rows[0]][cols[1]], mat[rows[1]][cols[0]]),
            )

        det = ex.add(
            *[
                ex.mul(ex.num((-1) ** j), mat[0][j], minor(0, j))
                for j in range(3)
            ]
        )
        inv_det = ex.pow_(det, -1)
        inv = [
            [ex.mul(ex.num((-1) ** (r + s)), minor(s, r), inv_det) for s in range(3)]
            for r in range(3)
        ]
        return inv, det
    raise ChartError("symbolic matrix inverse supported up to size 3")


@dataclass(frozen=True)
class FiberedDiffeo:
    """A stratified coordinate change with a closed-form inverse.

    ``base_map``/``fiber_map`` express the new coordinates over the old chart;
    the inverse maps express the old coordinates over the new chart (same
    symbol names read as primed).
    """

    base_map: list
    fiber_map: list
    inv_base_map: list
    inv_fiber_map: list


def _prolong_map(chart: JetChart, base_map: list, fiber_map: list, order: int) -> dict[tuple, Expr]:
    """Jets of the transformed section expressed over the source chart.

    Produces expressions for the primed jet coordinates y'^i_{mu'...} as
    functions of the unprimed jets, using d/dx'^mu = (dx'/dx)^{-1} d/dx.
    """
    m, n = len(chart.base), len(chart.fiber)
    jac = [[ex.diff(base_map[nu], chart.base[rho]) for rho in range(m)] for nu in range(m)]
    inv_jac, _det = _mat_inverse(jac, m)  # inv_jac[rho][mu'] = dx^rho/dx'^mu
    out: dict[tuple, Expr] = {}
    for i in range(n):
        out[(i, ())] = fiber_map[i]
    frontier = [(i, ()) for i in range(n)]
    for k in range(1, order + 1):
        new = []
        for (i, idx) in frontier:
            for mu in range(m):
                if idx and mu < idx[-1]:
                    continue
                tgt = idx + (mu,)
                e = ex.add(
                    *[
                        ex.mul(inv_jac[rho][mu], chart.total_derivative(out[(i, idx)], rho))
                        for rho in range(m)
                    ]
                )
                out[(i, tgt)] = e
                new.append((i, tgt))
        frontier = new
    return out


def chart_change_check(
    L: Lagrangian,
    diffeo: FiberedDiffeo,
    trials: int = 50,
    tol: float = 1e-8,
    seed: int = 0,
) -> bool:
    """Numeric check of the tensor-density transformation law of field equations.

    The density is pulled back through the inverse maps onto a primed copy of
    the chart, its field equations are derived there, and at random jet
    points both sides of ``E'_i = det(dx/dx') E_k (dy^k/dy'^i)`` are compared.
    """
    c = L.chart
    m, n = L.m, L.n
    work = c.extended(2 * L.order)

    # primed density: substitute the inverse section into L, times det(dx/dx')
    inv_prolong = _prolong_map(work, diffeo.inv_base_map, diffeo.inv_fiber_map, L.order)
    sub = {work.base[mu]: diffeo.inv_base_map[mu] for mu in range(m)}
    for (i, idx), e in inv_prolong.items():
        sub[work.jet_name(i, idx)] = e
    inv_jac = [
        [ex.diff(diffeo.inv_base_map[rho], work.base[nu]) for nu in range(m)] for rho in range(m)
    ]
    if m == 1:
        det = inv_jac[0][0]
    elif m == 2:
        det = ex.add(
            ex.mul(inv_jac[0][0], inv_jac[1][1]),
            ex.mul(ex.num(-1), inv_jac[0][1], inv_jac[1][0]),
        )
    else:
        raise ChartError("chart change check supports base dimension <= 2")
    primed_density = ex.mul(ex.substitute(L.density, sub), det)
    L_primed = Lagrangian(c, primed_density, L.order)
    E_primed = euler_lagrange(L_primed)
    E = euler_lagrange(L)

    # forward jet map: primed jets over the unprimed chart
    fwd = _prolong_map(work, diffeo.base_map, diffeo.fiber_map, 2 * L.order)
    fiber_jac = [
        [ex.diff(diffeo.fiber_map[k], work.fiber[i]) for i in range(n)] for k in range(n)
    ]
    inv_fiber_jac, _ = _mat_inverse(fiber_jac, n)  # dy^k / dy'^i over (x, y)
    det_fwd = ex.substitute(det, {work.base[mu]: diffeo.base_map[mu] for mu in range(m)})

    rng = random.Random(seed)
    names = [s for s in work.names() if work.symbol(s).role in ("base", "fiber", "param")]
    succeeded = 0
    for _ in range(trials):
        b = {nm: rng.uniform(-2.0, 2.0) for nm in names}
        try:
            b_primed = {work.base[mu]: ex.evaluate(diffeo.base_map[mu], b) for mu in range(m)}
            for (i, idx), e in fwd.items():
                b_primed[work.jet_name(i, idx)] = ex.evaluate(e, b)
            for nm in work.params:
                b_primed[nm] = b[nm]
            jdet = ex.evaluate(det_fwd, b)
            jfib = [[ex.evaluate(inv_fiber_jac[k][i], b) for i in range(n)] for k in range(n)]
            for i in range(n):
                lhs = ex.evaluate(E_primed.components[i], b_primed)
                rhs = jdet * sum(
                    ex.evaluate(E.components[k], b) * jfib[k][i] for k in range(n)
                )
                if abs(lhs - rhs) > tol * (1.0 + abs(rhs)):
                    return False
            succeeded += 1
        except ex.DomainError:
            continue
    if succeeded < max(1, trials // 2):
        raise ChartError(
            f"singular Jacobian at sample points: only {succeeded}/{trials} admissible"
        )
    return True
