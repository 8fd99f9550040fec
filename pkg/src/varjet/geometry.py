"""Riemannian metrics, curvature, geodesic Lagrangians and Jacobi operators.

Charts here are mechanics charts: one base coordinate ``t`` and fiber
coordinates ``x1..xn`` with velocity aliases ``u1..un`` for the first jets.
The curvature sign convention is pinned by the unit-sphere equator block
``R_{a mu nu b} u^mu u^nu`` having eigenvalues (0, -1); see the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import expr as ex
from .charts import ChartError, JetChart, composite_extend, make_chart
from .expr import Expr
from .variation import Lagrangian

__all__ = [
    "MetricChart",
    "CurvatureData",
    "metric_chart",
    "flat_metric",
    "sphere_stereographic",
    "metric_catalog",
    "christoffel",
    "riemann",
    "geodesic_lagrangian",
    "curvature_velocity_block",
    "geodesic_jacobi_equation",
    "eigen2x2_symmetric",
    "negative_eigenvector",
]


@dataclass(frozen=True)
class MetricChart:
    """A metric given by component expressions over the fiber coordinates."""

    chart: JetChart
    g: tuple
    g_inv: tuple

    @property
    def dim(self) -> int:
        return len(self.chart.fiber)

    def component(self, a: int, b: int) -> Expr:
        return self.g[a][b]

    def evaluate(self, point) -> list[list[float]]:
        b = {self.chart.fiber[i]: float(point[i]) for i in range(self.dim)}
        return [[ex.evaluate(self.g[a][c], b) for c in range(self.dim)] for a in range(self.dim)]


@dataclass(frozen=True)
class CurvatureData:
    """Christoffel symbols and the Riemann tensor in both index positions."""

    christoffel: tuple  # Gamma[l][m][n]
    riemann_up: tuple  # R^r_{s mu nu} as [r][s][mu][nu]
    riemann_low: tuple  # R_{r s mu nu}


def _mech_chart(n: int, order: int = 2) -> JetChart:
    fiber = tuple(f"x{k + 1}" for k in range(n))
    aliases = {f"u{k + 1}": f"x{k + 1}_t" for k in range(n)}
    return make_chart(1, n, order, base=("t",), fiber=fiber, aliases=aliases)


def metric_chart(components, chart: JetChart | None = None) -> MetricChart:
    """Build a metric from an n x n nested list of expressions.

    Components may use the chart fiber coordinates only; symmetry is
    required, and a closed-form inverse is computed for n <= 3.
    """
    n = len(components)
    if chart is None:
        chart = _mech_chart(n)
    if len(chart.fiber) != n:
        raise ChartError("metric dimension does not match the chart fiber")
    g = [[ex._as_expr(components[a][b]) for b in range(n)] for a in range(n)]
    for a in range(n):
        for b in range(n):
            if g[a][b] != g[b][a]:
                raise ChartError(f"metric components not symmetric at ({a}, {b})")
            for name in ex.free_symbols(g[a][b]):
                s = chart.symbol(name)
                if s.role != "fiber" or s.order != 0:
                    raise ChartError("metric components depend on positions only")
    from .variation import _mat_inverse

    g_inv, det = _mat_inverse(g, n)
    if det.is_exact_zero():
        raise ChartError("singular metric: determinant is identically zero")
    return MetricChart(chart, tuple(tuple(r) for r in g), tuple(tuple(r) for r in g_inv))


def flat_metric(n: int = 2) -> MetricChart:
    return metric_chart([[ex.num(1 if a == b else 0) for b in range(n)] for a in range(n)])


def sphere_stereographic(radius=1) -> MetricChart:
    """Round sphere in a single stereographic chart, conformal factor
    ``4 R^4 / (R^2 + x1^2 + x2^2)^2``.  The circle of chart radius R is the
    image of a great circle and is unit-speed as ``(R cos(t/R), R sin(t/R))``
    scaled appropriately; for R = 1 the equator is ``(cos t, sin t)``.
    """
    if isinstance(radius, float):
        if radius <= 0:
            raise ChartError("radius must be positive")
        R2 = ex.num(radius * radius)
        R4 = ex.num(radius**4)
    else:
        R = Fraction(radius)
        if R <= 0:
            raise ChartError("radius must be positive")
        R2, R4 = ex.num(R * R), ex.num(R**4)
    chart = _mech_chart(2)
    x1, x2 = chart.sym("x1"), chart.sym("x2")
    conf = 4 * R4 * (R2 + x1**2 + x2**2) ** -2
    zero = ex.ZERO
    return metric_chart([[conf, zero], [zero, conf]], chart)


def metric_catalog(name: str) -> MetricChart:
    """Named metrics addressable from the command line."""
    table = {
        "flat2": lambda: flat_metric(2),
        "sphere1": lambda: sphere_stereographic(1),
        "sphere2": lambda: sphere_stereographic(2),
    }
    if name not in table:
        raise ChartError(f"unknown metric {name!r}; known: {', '.join(sorted(table))}")
    return table[name]()


def christoffel(M: MetricChart):
    """Levi-Civita connection coefficients Gamma^l_{mn}."""
    n = M.dim
    fib = M.chart.fiber
    half = ex.num(Fraction(1, 2))
    dg = [
        [[ex.diff(M.g[a][b], fib[c]) for c in range(n)] for b in range(n)]
        for a in range(n)
    ]
    out = []
    for l in range(n):
        row = []
        for m_ in range(n):
            col = []
            for nn in range(n):
                s = ex.add(
                    *[
                        ex.mul(
                            M.g_inv[l][r],
                            ex.add(
                                dg[r][nn][m_],
                                dg[r][m_][nn],
                                ex.mul(ex.num(-1), dg[m_][nn][r]),
                            ),
                        )
                        for r in range(n)
                    ]
                )
                col.append(ex.mul(half, s))
            row.append(col)
        out.append(row)
    return [[list(c) for c in r] for r in out]


def riemann(M: MetricChart) -> CurvatureData:
    """Curvature with convention R^r_{s mu nu} = d_mu G^r_{nu s} - d_nu G^r_{mu s}
    + G^r_{mu l} G^l_{nu s} - G^r_{nu l} G^l_{mu s}, lowered on the first slot."""
    n = M.dim
    fib = M.chart.fiber
    G = christoffel(M)
    up = [[[[ex.ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for r in range(n):
        for s in range(n):
            for mu in range(n):
                for nu in range(n):
                    terms = [
                        ex.diff(G[r][nu][s], fib[mu]),
                        ex.mul(ex.num(-1), ex.diff(G[r][mu][s], fib[nu])),
                    ]
                    for l in range(n):
                        terms.append(ex.mul(G[r][mu][l], G[l][nu][s]))
                        terms.append(ex.mul(ex.num(-1), G[r][nu][l], G[l][mu][s]))
                    up[r][s][mu][nu] = ex.add(*terms)
    low = [
        [
            [
                [
                    ex.add(*[ex.mul(M.g[r][l], up[l][s][mu][nu]) for l in range(n)])
                    for nu in range(n)
                ]
                for mu in range(n)
            ]
            for s in range(n)
        ]
        for r in range(n)
    ]
    return CurvatureData(
        tuple(tuple(tuple(c) for c in r) for r in G),
        tuple(tuple(tuple(tuple(x) for x in m) for m in s) for s in up),
        tuple(tuple(tuple(tuple(x) for x in m) for m in s) for s in low),
    )


def geodesic_lagrangian(M: MetricChart) -> Lagrangian:
    """Energy density (1/2) g_{mu nu} u^mu u^nu on the mechanics chart."""
    n = M.dim
    c = M.chart
    u = [c.sym(f"u{k + 1}") for k in range(n)]
    half = ex.num(Fraction(1, 2))
    density = ex.mul(
        half, ex.add(*[ex.mul(M.g[a][b], u[a], u[b]) for a in range(n) for b in range(n)])
    )
    return Lagrangian(c, density, 1)


def curvature_velocity_block(M: MetricChart, curv: CurvatureData | None = None):
    """The matrix H_{ab} = R_{a mu nu b} u^mu u^nu over positions and velocities."""
    n = M.dim
    c = M.chart
    if curv is None:
        curv = riemann(M)
    u = [c.sym(f"u{k + 1}") for k in range(n)]
    return [
        [
            ex.add(
                *[
                    ex.mul(curv.riemann_low[a][mu][nu][b], u[mu], u[nu])
                    for mu in range(n)
                    for nu in range(n)
                ]
            )
            for b in range(n)
        ]
        for a in range(n)
    ]


def geodesic_jacobi_equation(M: MetricChart):
    """Linearized geodesic equation for a position-dependent perturbation.

    Returns the lowered components
    ``D_a = g_{ab} u^mu u^nu (grad_mu grad_nu X)^b - H_{as} X^s``
    as expressions on the composite extension of the mechanics chart, with
    the perturbation slots restricted to fiber derivatives (no explicit time
    dependence).  Vanishing of all components is the Jacobi field condition;
    the on-shell variational perturbation equation equals ``-D_a``.
    """
    n = M.dim
    comp = composite_extend(M.chart.extended(2), z_order=2)
    curv = riemann(M)
    G = curv.christoffel
    u = [comp.sym(f"u{k + 1}") for k in range(n)]
    X = [comp.z_jet(a) for a in range(n)]
    dX = [[comp.z_jet(a, (), (k,)) for k in range(n)] for a in range(n)]
    ddX = [
        [[comp.z_jet(a, (), tuple(sorted((k, l)))) for l in range(n)] for k in range(n)]
        for a in range(n)
    ]
    # grad_nu X^a = d_nu X^a + G^a_{nu s} X^s
    grad = [
        [
            ex.add(dX[a][nu], *[ex.mul(G[a][nu][s], X[s]) for s in range(n)])
            for nu in range(n)
        ]
        for a in range(n)
    ]
    # grad_mu grad_nu X^a
    def grad2(a, mu, nu):
        terms = [ddX[a][mu][nu]]
        for s in range(n):
            terms.append(ex.mul(ex.diff(G[a][nu][s], comp.fiber[mu]), X[s]))
            terms.append(ex.mul(G[a][nu][s], dX[s][mu]))
            terms.append(ex.mul(G[a][mu][s], grad[s][nu]))
            terms.append(ex.mul(ex.num(-1), G[s][mu][nu], grad[a][s]))
        return ex.add(*terms)

    H = curvature_velocity_block(M, curv)
    out = []
    for a in range(n):
        cov = ex.add(
            *[
                ex.mul(M.g[a][b], u[mu], u[nu], grad2(b, mu, nu))
                for b in range(n)
                for mu in range(n)
                for nu in range(n)
            ]
        )
        rterm = ex.add(*[ex.mul(H[a][s], X[s]) for s in range(n)])
        out.append(ex.add(cov, ex.mul(ex.num(-1), rterm)))
    return out


def eigen2x2_symmetric(mat, tol: float = 1e-12) -> tuple[float, float]:
    """Eigenvalues of a symmetric 2x2 matrix, in descending order."""
    (a, b), (c, d) = mat
    scale = max(abs(a), abs(b), abs(c), abs(d), 1.0)
    if abs(b - c) > tol * scale:
        raise ValueError(f"matrix is not symmetric within {tol}")
    tr = a + d
    disc = math.sqrt(max((a - d) * (a - d) + 4.0 * b * c, 0.0))
    return ((tr + disc) / 2.0, (tr - disc) / 2.0)


def negative_eigenvector(mat, tol: float = 1e-12) -> tuple[float, float]:
    """Unit eigenvector of the smaller eigenvalue of a symmetric 2x2 matrix."""
    (a, b), (c, d) = mat
    _l1, l2 = eigen2x2_symmetric(mat, tol)
    cands = [(b, l2 - a), (l2 - d, c)]
    vx, vy = max(cands, key=lambda v: v[0] * v[0] + v[1] * v[1])
    norm = math.hypot(vx, vy)
    if norm == 0.0:
        return (1.0, 0.0)  # degenerate (multiple eigenvalue); any direction works
    return (vx / norm, vy / norm)
