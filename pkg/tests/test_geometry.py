import math
from fractions import Fraction

import pytest

from varjet import expr as ex
from varjet.charts import ChartError, composite_extend, make_chart
from varjet.geometry import (
    christoffel,
    curvature_velocity_block,
    eigen2x2_symmetric,
    flat_metric,
    geodesic_jacobi_equation,
    geodesic_lagrangian,
    metric_catalog,
    metric_chart,
    negative_eigenvector,
    riemann,
    sphere_stereographic,
)
from varjet.linearize import jacobi_equations
from varjet.variation import euler_lagrange

HALF = ex.num(Fraction(1, 2))


def equator_bindings(t: float) -> dict:
    return {
        "x1": math.cos(t),
        "x2": math.sin(t),
        "x1_t": -math.sin(t),
        "x2_t": math.cos(t),
    }


class TestMetricChart:
    def test_symmetry_required(self):
        c = make_chart(1, 2, 2, fiber=("x1", "x2"))
        with pytest.raises(ChartError):
            metric_chart([[ex.num(1), c.sym("x1")], [ex.num(0), ex.num(1)]], c)

    def test_position_dependence_only(self):
        c = make_chart(1, 2, 2, fiber=("x1", "x2"))
        with pytest.raises(ChartError):
            metric_chart([[c.sym("x1_t"), ex.ZERO], [ex.ZERO, ex.num(1)]], c)

    def test_structurally_singular_rejected(self):
        c = make_chart(1, 2, 2, fiber=("x1", "x2"))
        x1 = c.sym("x1")
        with pytest.raises(ChartError):
            metric_chart([[x1, x1], [x1, x1]], c)

    def test_catalog(self):
        assert metric_catalog("flat2").dim == 2
        assert metric_catalog("sphere1").evaluate([0.0, 0.0])[0][0] == 4.0
        with pytest.raises(ChartError):
            metric_catalog("nope")


class TestSphereChart:
    def test_conformal_factor_values(self, unit_sphere):
        # 4/(1+r^2)^2: 4 at the origin, 1 on the unit circle
        assert unit_sphere.evaluate([0.0, 0.0]) == [[4.0, 0.0], [0.0, 4.0]]
        g = unit_sphere.evaluate([1.0, 0.0])
        assert abs(g[0][0] - 1.0) < 1e-15 and abs(g[1][1] - 1.0) < 1e-15

    def test_radius_validation(self):
        with pytest.raises(ChartError):
            sphere_stereographic(0)
        with pytest.raises(ChartError):
            sphere_stereographic(-1.5)

    def test_equator_is_solution(self, sphere_geodesic_lagrangian):
        from varjet.charts import SectionSamples
        from varjet.variation import residual

        E = euler_lagrange(sphere_geodesic_lagrangian)
        c = E.chart
        t = c.sym("t")
        eq = SectionSamples.from_exprs(c, [ex.cos(t), ex.sin(t)])
        worst = max(max(abs(v) for v in residual(E, eq, 0.37 * k)) for k in range(17))
        assert worst <= 1e-9

    def test_radius_two_circle_is_solution(self):
        from varjet.charts import SectionSamples
        from varjet.variation import residual

        S2 = sphere_stereographic(2)
        E = euler_lagrange(geodesic_lagrangian(S2))
        c = E.chart
        t = c.sym("t")
        eq = SectionSamples.from_exprs(c, [2 * ex.cos(HALF * t), 2 * ex.sin(HALF * t)])
        worst = max(max(abs(v) for v in residual(E, eq, 0.4 * k)) for k in range(16))
        assert worst <= 1e-9


class TestChristoffel:
    def test_flat(self):
        G = christoffel(flat_metric(2))
        assert all(
            G[l][m][n] == ex.ZERO for l in range(2) for m in range(2) for n in range(2)
        )

    def test_sphere_component(self, unit_sphere):
        # oracle: hand differentiation of the conformal factor gives
        # G^1_{11} = -2 x1 / (1 + x1^2 + x2^2)
        G = christoffel(unit_sphere)
        c = unit_sphere.chart
        x1, x2 = c.sym("x1"), c.sym("x2")
        expected = -2 * x1 * (1 + x1**2 + x2**2) ** -1
        assert ex.is_zero(G[0][0][0] - expected, trials=50, tol=1e-10)

    def test_symmetry_in_lower_indices(self, unit_sphere):
        G = christoffel(unit_sphere)
        for l in range(2):
            for m in range(2):
                for n in range(2):
                    assert G[l][m][n] == G[l][n][m]

    def test_geodesic_equation_form(self, unit_sphere, sphere_geodesic_lagrangian):
        # E_lam == -g_{lam nu} (udot^nu + G^nu_{ab} u^a u^b)
        E = euler_lagrange(sphere_geodesic_lagrangian)
        c = E.chart
        G = christoffel(unit_sphere)
        acc = [c.sym("x1_tt"), c.sym("x2_tt")]
        u = [c.sym("x1_t"), c.sym("x2_t")]
        for lam in range(2):
            rhs = ex.add(
                *[
                    ex.mul(
                        ex.num(-1),
                        unit_sphere.g[lam][nu],
                        ex.add(
                            acc[nu],
                            *[
                                ex.mul(G[nu][a][b], u[a], u[b])
                                for a in range(2)
                                for b in range(2)
                            ],
                        ),
                    )
                    for nu in range(2)
                ]
            )
            assert ex.is_zero(E.components[lam] - rhs, trials=50, tol=1e-9)

    def test_metric_compatibility(self, unit_sphere):
        # nabla_c g_{ab} = d_c g_{ab} - G^l_{ca} g_{lb} - G^l_{cb} g_{al} == 0
        G = christoffel(unit_sphere)
        g = unit_sphere.g
        fib = unit_sphere.chart.fiber
        for cdx in range(2):
            for a in range(2):
                for b in range(2):
                    nabla = ex.add(
                        ex.diff(g[a][b], fib[cdx]),
                        *[ex.mul(ex.num(-1), G[l][cdx][a], g[l][b]) for l in range(2)],
                        *[ex.mul(ex.num(-1), G[l][cdx][b], g[a][l]) for l in range(2)],
                    )
                    assert nabla.is_exact_zero() or ex.is_zero(nabla, trials=30, tol=1e-10)


class TestRiemann:
    def test_flat(self):
        C = riemann(flat_metric(2))
        assert all(
            C.riemann_low[a][b][c][d] == ex.ZERO
            for a in range(2)
            for b in range(2)
            for c in range(2)
            for d in range(2)
        )

    def test_unit_sphere_sectional_curvature(self, unit_sphere):
        # K = R_{1212} / (g11 g22 - g12^2) == 1
        C = riemann(unit_sphere)
        g = unit_sphere.g
        K = C.riemann_low[0][1][0][1] * (g[0][0] * g[1][1] - g[0][1] ** 2) ** -1
        assert ex.is_zero(K - 1, trials=50, tol=1e-9)

    def test_antisymmetry_last_pair(self, unit_sphere):
        C = riemann(unit_sphere)
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        s = ex.add(C.riemann_low[a][b][c][d], C.riemann_low[a][b][d][c])
                        assert s.is_exact_zero() or ex.is_zero(s, trials=20, tol=1e-9)

    def test_first_bianchi(self, unit_sphere):
        C = riemann(unit_sphere)
        R = C.riemann_low
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        s = ex.add(R[a][b][c][d], R[a][c][d][b], R[a][d][b][c])
                        assert s.is_exact_zero() or ex.is_zero(s, trials=20, tol=1e-9)

    def test_equator_block_matrix(self, unit_sphere):
        # the convention lock: the velocity-contracted block on the equator
        H = curvature_velocity_block(unit_sphere)
        for k in range(20):
            t = 2 * math.pi * k / 20 + 0.05
            b = equator_bindings(t)
            Hv = [[ex.evaluate(H[a][c], b) for c in range(2)] for a in range(2)]
            expected = [
                [-math.cos(t) ** 2, -math.cos(t) * math.sin(t)],
                [-math.cos(t) * math.sin(t), -math.sin(t) ** 2],
            ]
            for a in range(2):
                for c in range(2):
                    assert abs(Hv[a][c] - expected[a][c]) <= 1e-9


class TestEigen:
    def test_equator_eigenvalues(self, unit_sphere):
        H = curvature_velocity_block(unit_sphere)
        for k in range(20):
            t = 2 * math.pi * k / 20 + 0.05
            b = equator_bindings(t)
            Hv = [[ex.evaluate(H[a][c], b) for c in range(2)] for a in range(2)]
            l1, l2 = eigen2x2_symmetric(Hv, tol=1e-9)
            assert abs(l1) <= 1e-9 and abs(l2 + 1) <= 1e-9

    def test_negative_eigenvector_normal_to_equator(self, unit_sphere):
        H = curvature_velocity_block(unit_sphere)
        for k in range(10):
            t = 2 * math.pi * k / 10 + 0.1
            b = equator_bindings(t)
            Hv = [[ex.evaluate(H[a][c], b) for c in range(2)] for a in range(2)]
            v = negative_eigenvector(Hv, tol=1e-9)
            cross = v[0] * math.sin(t) - v[1] * math.cos(t)
            assert abs(cross) <= 1e-7

    def test_identity_matrix(self):
        assert eigen2x2_symmetric([[1.0, 0.0], [0.0, 1.0]]) == (1.0, 1.0)

    def test_descending_order(self):
        l1, l2 = eigen2x2_symmetric([[0.0, 2.0], [2.0, -3.0]])
        assert l1 >= l2
        # oracle: closed-form quadratic for [[0,2],[2,-3]]
        disc = math.sqrt(9 + 16)
        assert abs(l1 - (-3 + disc) / 2) < 1e-14
        assert abs(l2 - (-3 - disc) / 2) < 1e-14

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            eigen2x2_symmetric([[1.0, 0.5], [0.2, 1.0]])


class TestGeodesicJacobiEquation:
    def test_flat_reduces_to_plain_second_derivative(self):
        F = flat_metric(2)
        D = geodesic_jacobi_equation(F)
        comp = composite_extend(F.chart.extended(2), z_order=2)
        u = [comp.sym("u1"), comp.sym("u2")]
        for a in range(2):
            expected = ex.add(
                *[
                    ex.mul(u[mu], u[nu], comp.z_jet(a, (), tuple(sorted((mu, nu)))))
                    for mu in range(2)
                    for nu in range(2)
                ]
            )
            assert D[a] == expected

    def test_on_shell_matches_variational_perturbation(self, unit_sphere,
                                                       sphere_geodesic_lagrangian):
        # cross-check contract: the variational perturbation equation, with
        # accelerations eliminated and the perturbation restricted to
        # positions, equals -D
        eqs = jacobi_equations(sphere_geodesic_lagrangian)
        comp = eqs.chart
        D = geodesic_jacobi_equation(unit_sphere)
        G = christoffel(unit_sphere)
        u = [comp.sym("u1"), comp.sym("u2")]
        acc_sub = {
            comp.jet_name(nu, (0, 0)): ex.add(
                *[
                    ex.mul(ex.num(-1), G[nu][a][b], u[a], u[b])
                    for a in range(2)
                    for b in range(2)
                ]
            )
            for nu in range(2)
        }
        zsub = {s.name: ex.ZERO for s in comp.z_symbols() if s.dbase}
        for k in range(2):
            pe = ex.substitute(ex.substitute(eqs.perturbation_eq[k], zsub), acc_sub)
            d = ex.add(pe, D[k])
            assert d.is_exact_zero() or ex.is_zero(d, trials=100, tol=1e-10)

    def test_normal_component_oscillates(self, unit_sphere):
        # reduction along the equator: the normal component obeys f'' + f = 0,
        # so seeding f(0) = 0, f'(0) = 1 must reproduce sin t pointwise
        import numpy as np

        from varjet.integrate import geodesic_trajectory, jacobi_field_track

        traj = geodesic_trajectory(unit_sphere, [1.0, 0.0], [0.0, 1.0], (0.0, 3.0), 1e-3)
        ts, fs, _ = jacobi_field_track(unit_sphere, traj, [1.0, 0.0])
        idx = np.linspace(0, len(ts) - 1, 20).astype(int)
        for j in idx:
            assert abs(fs[j] - math.sin(ts[j])) <= 1e-6
