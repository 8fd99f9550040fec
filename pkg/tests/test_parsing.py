import math
from fractions import Fraction

import pytest

from varjet import expr as ex
from varjet.charts import make_chart
from varjet.parsing import (
    ExprParseError,
    SpecFileError,
    chart_to_spec_lines,
    parse_expression,
    parse_problem_text,
)

HALF = ex.num(Fraction(1, 2))


class TestExpressionGrammar:
    def test_precedence_and_rationals(self):
        c = make_chart(1, 1, 2, aliases={"u": "y_t"})
        e = parse_expression("(1/2)*y_t^2 - (1/2)*y^2", c)
        assert e == HALF * c.sym("y_t") ** 2 - HALF * c.sym("y") ** 2

    def test_alias_resolution(self):
        c = make_chart(1, 1, 2, aliases={"u": "y_t"})
        assert parse_expression("u^2", c) == c.sym("y_t") ** 2

    def test_conformal_factor(self):
        e = parse_expression("4/(1+x^2+y^2)^2")
        assert e == 4 * (1 + ex.sym("x") ** 2 + ex.sym("y") ** 2) ** -2

    def test_unary_minus_binds_below_power(self):
        assert parse_expression("-x^2") == -ex.sym("x") ** 2

    def test_negative_and_rational_exponents(self):
        assert parse_expression("x^-2") == ex.sym("x") ** -2
        assert parse_expression("x^(1/2)") == ex.sqrt(ex.sym("x"))

    def test_functions(self):
        assert parse_expression("sqrt(x)") == ex.sqrt(ex.sym("x"))
        assert parse_expression("sin(t)*cos(t)") == ex.sin(ex.sym("t")) * ex.cos(ex.sym("t"))

    def test_numbers_exact(self):
        assert parse_expression("1.5").value == Fraction(3, 2)
        assert parse_expression("2e-3").value == Fraction(1, 500)
        assert abs(parse_expression("0.5*pi").value - math.pi / 2) < 1e-15

    def test_error_positions(self):
        with pytest.raises(ExprParseError) as err:
            parse_expression("x + @", line=3)
        assert err.value.line == 3 and err.value.col == 5
        with pytest.raises(ExprParseError):
            parse_expression("x^y")
        with pytest.raises(ExprParseError):
            parse_expression("foo(x)")
        with pytest.raises(ExprParseError):
            parse_expression("(x + y")

    def test_unknown_symbol_against_chart(self):
        c = make_chart(1, 1, 1)
        with pytest.raises(ExprParseError):
            parse_expression("q + y", c)


class TestProblemFiles:
    def test_free_particle(self):
        spec = parse_problem_text(
            """
            # free particle
            base = t
            fiber = y
            order = 1
            lagrangian = (1/2)*u^2
            solution = t
            """
        )
        L = spec.lagrangian()
        assert L.density == HALF * ex.sym("y_t") ** 2
        assert spec.solution(L.chart.extended(2)) is not None

    def test_metric_catalog_and_trial(self):
        spec = parse_problem_text(
            """
            metric = sphere1
            order = 1
            solution = cos(t), sin(t)
            trial = sin(t/0.5)*cos(t), sin(t/0.5)*sin(t)
            t0 = 0
            t1 = 0.5*pi
            """
        )
        L = spec.lagrangian()
        assert L.n == 2
        trial = spec.trial(L.chart)
        assert abs(trial.t1 - math.pi / 2) < 1e-15

    def test_metric_components(self):
        spec = parse_problem_text(
            """
            fiber = x1, x2
            g11 = 4/(1+x1^2+x2^2)^2
            g22 = 4/(1+x1^2+x2^2)^2
            """
        )
        M = spec.metric()
        assert M.evaluate([0.0, 0.0])[0][0] == 4.0

    def test_params_substituted(self):
        spec = parse_problem_text(
            """
            base = t
            fiber = y
            order = 1
            param omega = 2
            lagrangian = (1/2)*u^2 - (1/2)*omega^2*y^2
            """
        )
        from varjet.variation import euler_lagrange

        E = euler_lagrange(spec.lagrangian())
        assert E.components[0] == ex.num(-4.0) * ex.sym("y") - ex.sym("y_tt")

    def test_unknown_key_rejected(self):
        with pytest.raises(SpecFileError) as err:
            parse_problem_text("bogus = 1")
        assert err.value.line == 1

    def test_duplicate_key_rejected(self):
        with pytest.raises(SpecFileError):
            parse_problem_text("order = 1\norder = 2")

    def test_bad_order(self):
        with pytest.raises(SpecFileError):
            parse_problem_text("order = 3")

    def test_metric_name_and_components_conflict(self):
        with pytest.raises(SpecFileError):
            parse_problem_text("metric = sphere1\ng11 = 1")

    def test_chart_roundtrip(self):
        spec = parse_problem_text(
            "base = t\nfiber = x1, x2\norder = 2\nlagrangian = y_placeholder"
            .replace("lagrangian = y_placeholder", "lagrangian = x1_tt^2")
        )
        lines = chart_to_spec_lines(spec.chart(), spec.order)
        spec2 = parse_problem_text("\n".join(lines))
        assert spec2.base == spec.base
        assert spec2.fiber == spec.fiber
        assert spec2.order == spec.order
