"""Linearized field equations from the variational construction.

The variation of a density contracted with a prolonged vertical field is
itself a density on the composite chart, linear in the perturbation layer.
Varying it independently in the underlying field and in the perturbation
yields the original field equations together with the linearized
(perturbation) equations.  The central identity implemented here is that the
perturbation equation equals the prolonged perturbation applied to the field
equations,

    pert_k  ==  sum_{|I| <= 2k} (d_I X^i) * d E_k / d y^i_I,

so a solution's deformation along a perturbation field stays a solution.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import expr as ex
from .charts import ChartError, JetChart, composite_extend
from .expr import Expr
from .variation import Lagrangian, _lagrangian_coefficients, euler_lagrange, momenta

__all__ = [
    "JacobiLagrangian",
    "JacobiEquations",
    "jacobi_lagrangian",
    "jacobi_equations",
    "tangency_defect",
    "first_order_linearization",
    "restrict_to_base_perturbation",
]


def _working_chart(L: Lagrangian) -> JetChart:
    """Composite chart holding all symbols of the linearized equations."""
    return composite_extend(L.chart.extended(2 * L.order), z_order=2 * L.order)


def _perturbation_jets(L: Lagrangian, comp: JetChart, max_order: int) -> dict:
    """Composite total derivatives d_I X^i keyed by (i, sorted multi-index)."""
    out: dict = {}
    for i in range(L.n):
        out[(i, ())] = comp.z_jet(i)
    for idx in comp.sorted_multi_indices(max_order, include_empty=False):
        for i in range(L.n):
            head, last = idx[:-1], idx[-1]
            out[(i, idx)] = comp.total_derivative(out[(i, head)], last)
    return out


@dataclass(frozen=True)
class JacobiLagrangian:
    """The induced density, linear in the perturbation layer.

    ``terms`` keeps the structured form: pairs of a momentum coefficient on
    the plain chart and the perturbation jet it multiplies.
    """

    chart: JetChart
    density: Expr
    source: Lagrangian
    terms: tuple  # ((i, idx, coefficient), ...)


def jacobi_lagrangian(L: Lagrangian) -> JacobiLagrangian:
    """Contract the vertical differential of the density with the perturbation jets.

    For a first-order density this is ``p_i X^i + p_i^mu d_mu X^i``; a
    second-order density adds the ``p_i^{mu nu} d_{mu nu} X^i`` row.  The
    result is degree-1 homogeneous in the perturbation layer.
    """
    comp = _working_chart(L)
    coeffs = _lagrangian_coefficients(L)
    dX = _perturbation_jets(L, comp, L.order)
    terms = []
    parts = []
    for (i, idx), coef in sorted(coeffs.items()):
        if coef.is_exact_zero():
            continue
        terms.append((i, idx, coef))
        parts.append(ex.mul(coef, dX[(i, idx)]))
    density = ex.add(*parts) if parts else ex.ZERO
    return JacobiLagrangian(comp, density, L, tuple(terms))


@dataclass(frozen=True)
class JacobiEquations:
    """Field equations of the induced density on the composite chart.

    ``base_eq`` are the original field equations (coefficient of the
    perturbation-layer variation); ``perturbation_eq`` the linearized
    equations (coefficient of the field variation), linear in the
    perturbation jets.
    """

    chart: JetChart
    base_eq: tuple
    perturbation_eq: tuple


def jacobi_equations(L: Lagrangian) -> JacobiEquations:
    comp = _working_chart(L)
    coeffs = _lagrangian_coefficients(L)
    dX = _perturbation_jets(L, comp, L.order)

    base = []
    for i in range(L.n):
        parts = []
        for idx in comp.sorted_multi_indices(L.order):
            coef = coeffs[(i, idx)]
            if coef.is_exact_zero():
                continue
            parts.append(
                ex.mul(ex.num((-1) ** len(idx)), comp.total_derivative_multi(coef, idx))
            )
        base.append(ex.add(*parts) if parts else ex.ZERO)

    pert = []
    for k in range(L.n):
        rows = []
        for jdx in comp.sorted_multi_indices(L.order):
            slot = comp.jet_name(k, jdx)
            inner = []
            for (i, idx), coef in coeffs.items():
                dcoef = ex.diff(coef, slot)
                if dcoef.is_exact_zero():
                    continue
                inner.append(ex.mul(dcoef, dX[(i, idx)]))
            if not inner:
                continue
            rows.append(
                ex.mul(
                    ex.num((-1) ** len(jdx)),
                    comp.total_derivative_multi(ex.add(*inner), jdx),
                )
            )
        pert.append(ex.add(*rows) if rows else ex.ZERO)
    return JacobiEquations(comp, tuple(base), tuple(pert))


def tangency_defect(L: Lagrangian) -> list[Expr]:
    """Perturbation equation minus the prolonged perturbation applied to the
    field equations.  Identically zero for any density; verifying this with
    the probabilistic zero test operationalizes the statement that
    perturbation flows drag solutions into solutions.
    """
    comp = _working_chart(L)
    eqs = jacobi_equations(L)
    E = euler_lagrange(L)
    dX = _perturbation_jets(L, comp, 2 * L.order)
    out = []
    for k in range(L.n):
        contraction = []
        for idx in comp.sorted_multi_indices(2 * L.order):
            for i in range(L.n):
                dE = ex.diff(E.components[k], comp.jet_name(i, idx))
                if dE.is_exact_zero():
                    continue
                contraction.append(ex.mul(dX[(i, idx)], dE))
        total = ex.add(*contraction) if contraction else ex.ZERO
        out.append(ex.add(eqs.perturbation_eq[k], ex.mul(ex.num(-1), total)))
    return out


def restrict_to_base_perturbation(eqs: JacobiEquations) -> list[Expr]:
    """Specialize the perturbation to depend on base coordinates only.

    Slots carrying fiber derivatives of the perturbation are set to zero;
    the remaining base-jet slots share their names with the plain adjoined
    chart ``L.chart.with_fields(perturbation names)``.
    """
    sub = {
        s.name: ex.ZERO
        for s in eqs.chart.z_symbols()
        if s.dfiber
    }
    return [ex.substitute(e, sub) for e in eqs.perturbation_eq]


def first_order_linearization(L: Lagrangian) -> list[Expr]:
    """First-order expansion of the field equations about a solution.

    For a first-order density the epsilon-coefficient of substituting
    ``y + eps X(x)`` into the field equations is

        X^i d_i p_k + X^i_mu d_i^mu p_k - d_mu (X^i d_i p_k^mu + X^i_eps d_i^eps p_k^mu)

    returned on the plain chart adjoined with the perturbation fields.  It
    agrees with the perturbation equation restricted to base-dependent
    perturbations.
    """
    if L.order != 1:
        raise ChartError("first-order linearization applies to order-1 densities")
    n, m = L.n, L.m
    z_names = ("X",) if n == 1 else tuple(f"X{k + 1}" for k in range(n))
    adj = L.chart.with_fields(z_names, order=2)
    mom = momenta(L)
    X = [adj.sym(z_names[i]) for i in range(n)]
    Xj = [[adj.sym(f"{z_names[i]}_{adj.base[mu]}") for mu in range(m)] for i in range(n)]

    out = []
    for k in range(n):
        terms = []
        for i in range(n):
            terms.append(ex.mul(X[i], ex.diff(mom.p[k], L.chart.fiber[i])))
            for mu in range(m):
                terms.append(ex.mul(Xj[i][mu], ex.diff(mom.p[k], L.chart.jet_name(i, (mu,)))))
        for mu in range(m):
            inner = []
            for i in range(n):
                inner.append(ex.mul(X[i], ex.diff(mom.p1[k][mu], L.chart.fiber[i])))
                for eps in range(m):
                    inner.append(
                        ex.mul(Xj[i][eps], ex.diff(mom.p1[k][mu], L.chart.jet_name(i, (eps,))))
                    )
            terms.append(
                ex.mul(ex.num(-1), adj.total_derivative(ex.add(*inner), mu))
            )
        out.append(ex.add(*terms))
    return out
