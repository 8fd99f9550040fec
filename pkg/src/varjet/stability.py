"""Second variation, the Hessian bilinear form, and trial-based stability.

Along the flow of a vertical field, a section expands as
``y_s = y + s dy + (1/2) s^2 d2y + O(s^3)`` with ``dy = X`` and
``d2y^i = (d_k X^i) dy^k``.  The density expands accordingly; the
coefficient of ``s^2/2`` splits into a row proportional to the field
equations (boundary-only on shell) plus a quadratic form in ``(dy, d dy)``
whose sign along trial deformations decides stability.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import expr as ex
from .charts import ChartError, JetChart, SectionSamples, composite_extend
from .expr import Expr
from .variation import Lagrangian, euler_lagrange, momenta, residual

__all__ = [
    "SecondVariation",
    "HessianForm",
    "TrialDeformation",
    "EndpointError",
    "second_variation",
    "hessian",
    "stability_integral",
    "stability_verdict",
    "third_order_coefficients",
]

ENDPOINT_TOL = 1e-12
MARGINAL_TOL = 1e-6  # verdict margin per unit interval length


class EndpointError(ChartError):
    """A trial deformation fails to vanish at an endpoint."""


@dataclass(frozen=True)
class SecondVariation:
    """The s^2-coefficient density on the composite chart.

    ``quadratic`` is the part with the second-order deformation slot set to
    zero: a quadratic form in the perturbation and its total derivatives.
    ``density`` adds the field-equation row with ``d2y^i = X^i_k X^k``.
    """

    chart: JetChart
    quadratic: Expr
    density: Expr
    source: Lagrangian


def second_variation(L: Lagrangian) -> SecondVariation:
    if L.order != 1:
        raise ChartError("second variation is implemented for order-1 densities")
    comp = composite_extend(L.chart.extended(2), z_order=2)
    n, m = L.n, L.m
    mom = momenta(L)
    z = [comp.z_jet(i) for i in range(n)]
    dz = [[comp.total_derivative(z[i], mu) for mu in range(m)] for i in range(n)]

    quad_terms = []
    for i in range(n):
        for k in range(n):
            quad_terms.append(ex.mul(ex.diff(mom.p[i], comp.fiber[k]), z[i], z[k]))
            for al in range(m):
                quad_terms.append(
                    ex.mul(
                        ex.num(2),
                        ex.diff(mom.p1[k][al], comp.fiber[i]),
                        z[i],
                        dz[k][al],
                    )
                )
                for mu in range(m):
                    quad_terms.append(
                        ex.mul(
                            ex.diff(mom.p1[i][mu], comp.jet_name(k, (al,))),
                            dz[i][mu],
                            dz[k][al],
                        )
                    )
    quadratic = ex.add(*quad_terms)

    d2y = [
        ex.add(*[ex.mul(comp.z_jet(i, (), (k,)), z[k]) for k in range(n)]) for i in range(n)
    ]
    row = []
    for i in range(n):
        row.append(ex.mul(mom.p[i], d2y[i]))
        for mu in range(m):
            row.append(ex.mul(mom.p1[i][mu], comp.total_derivative(d2y[i], mu)))
    density = ex.add(quadratic, *row)
    return SecondVariation(comp, quadratic, density, L)


@dataclass(frozen=True)
class HessianForm:
    """Blocks of the second-variation bilinear form.

    ``a[k][i]`` couples perturbation values, ``b[i][k][al]`` couples a value
    with a first derivative, ``c[k][al][i][mu]`` couples derivatives.  The
    assembled form reproduces the quadratic part of the second variation.
    """

    source: Lagrangian
    a: tuple
    b: tuple
    c: tuple

    def quadratic(self, comp: JetChart) -> Expr:
        n, m = self.source.n, self.source.m
        z = [comp.z_jet(i) for i in range(n)]
        dz = [[comp.total_derivative(z[i], mu) for mu in range(m)] for i in range(n)]
        terms = []
        for i in range(n):
            for k in range(n):
                terms.append(ex.mul(self.a[k][i], z[i], z[k]))
                for al in range(m):
                    terms.append(ex.mul(self.b[i][k][al], z[i], dz[k][al]))
                    terms.append(ex.mul(self.b[k][i][al], dz[i][al], z[k]))
                    for mu in range(m):
                        terms.append(ex.mul(self.c[k][al][i][mu], dz[i][mu], dz[k][al]))
        return ex.add(*terms)


def hessian(L: Lagrangian) -> HessianForm:
    if L.order != 1:
        raise ChartError("the Hessian form is implemented for order-1 densities")
    n, m = L.n, L.m
    c = L.chart
    mom = momenta(L)
    a = tuple(
        tuple(ex.diff(mom.p[i], c.fiber[k]) for i in range(n)) for k in range(n)
    )
    b = tuple(
        tuple(
            tuple(ex.diff(mom.p1[k][al], c.fiber[i]) for al in range(m)) for k in range(n)
        )
        for i in range(n)
    )
    cc = tuple(
        tuple(
            tuple(
                tuple(ex.diff(mom.p1[i][mu], c.jet_name(k, (al,))) for mu in range(m))
                for i in range(n)
            )
            for al in range(m)
        )
        for k in range(n)
    )
    return HessianForm(L, a, b, cc)


@dataclass(frozen=True)
class TrialDeformation:
    """A deformation along a solution: closed-form components of the base
    coordinate, pinned to zero at both endpoints."""

    components: tuple
    t0: float
    t1: float

    def check_endpoints(self, chart: JetChart):
        tname = chart.base[0]
        for e in self.components:
            for t in (self.t0, self.t1):
                v = ex.evaluate(e, {tname: t})
                if abs(v) > ENDPOINT_TOL:
                    raise EndpointError(
                        f"trial deformation is {v:.3e} at endpoint t={t!r}"
                    )


def stability_integral(
    L: Lagrangian,
    solution: SectionSamples,
    trial: TrialDeformation,
    panels: int = 10_000,
    residual_tol: float = 1e-8,
) -> float:
    """Quadrature of the on-shell quadratic form along a solution.

    The perturbation slots receive the trial components and their time
    derivatives (no fiber dependence); composite Simpson integration over
    ``[t0, t1]`` with the given number of panels.  The solution must satisfy
    the field equations to ``residual_tol`` on the interval.
    """
    from .integrate import simpson

    if len(L.chart.base) != 1:
        raise ChartError("stability integrals run over a one-dimensional base")
    if len(trial.components) != L.n:
        raise ChartError("one trial component per fiber coordinate required")
    sv = second_variation(L)
    trial.check_endpoints(L.chart)

    E = euler_lagrange(L)
    for j in range(21):
        t = trial.t0 + (trial.t1 - trial.t0) * j / 20
        worst = max(abs(v) for v in residual(E, solution, t))
        if worst > residual_tol:
            raise ChartError(
                f"solution residual {worst:.3e} exceeds {residual_tol} at t={t:.6g}"
            )

    comp = sv.chart
    tname = comp.base[0]
    sub = {}
    for s in comp.z_symbols():
        if s.dfiber:
            sub[s.name] = ex.ZERO
        else:
            e = trial.components[s.index]
            for _ in s.dbase:
                e = ex.diff(e, tname)
            sub[s.name] = e
    quad = ex.substitute(sv.quadratic, sub)

    if solution.kind == "exprs":
        rows = solution._derivative_exprs(1)
        smap = {}
        for i in range(L.n):
            smap[comp.fiber[i]] = rows[0][i]
            smap[comp.jet_name(i, (0,))] = rows[1][i]
        integrand = ex.substitute(quad, smap)
        fn = ex.compile_exprs([integrand], [tname])
        return simpson(lambda t: fn(t)[0], trial.t0, trial.t1, panels)

    def f(t: float) -> float:
        b = solution.jet(t, 1)
        b.pop("__values__", None)
        return ex.evaluate(quad, b)

    return simpson(f, trial.t0, trial.t1, panels)


def stability_verdict(value: float, interval: float, margin: float = MARGINAL_TOL) -> str:
    """Classify a trial integral: 'marginal' within ``margin * interval`` of
    zero, otherwise 'unstable' for negative and 'stable-trialwise' for
    positive values (no instability found by this trial)."""
    if abs(value) <= margin * abs(interval):
        return "marginal"
    return "unstable" if value < 0 else "stable-trialwise"


def third_order_coefficients(
    X_components: list, chart: JetChart
) -> tuple[list, list, list]:
    """Deformation coefficients of the flow expansion through third order.

    Returns ``(dy, d2y, d3y)`` with ``dy^i = X^i``, ``d2y^i = X^i_k dy^k``
    and ``d3y^i = X^i_k d2y^k + X^i_{kn} dy^k dy^n``, where subscripts are
    fiber partials of the components.
    """
    n = len(chart.fiber)
    if len(X_components) != n:
        raise ChartError("one component per fiber coordinate required")
    for e in X_components:
        chart.validate(e, max_order=0, allow_z=False)
    dy = [ex._as_expr(e) for e in X_components]
    dX = [[ex.diff(dy[i], chart.fiber[k]) for k in range(n)] for i in range(n)]
    d2y = [ex.add(*[ex.mul(dX[i][k], dy[k]) for k in range(n)]) for i in range(n)]
    d3y = []
    for i in range(n):
        terms = [ex.mul(dX[i][k], d2y[k]) for k in range(n)]
        for k in range(n):
            for nn in range(n):
                terms.append(
                    ex.mul(ex.diff(dX[i][k], chart.fiber[nn]), dy[k], dy[nn])
                )
        d3y.append(ex.add(*terms))
    return dy, d2y, d3y
