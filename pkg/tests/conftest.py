import random
from fractions import Fraction

import pytest

from varjet import expr as ex
from varjet.charts import make_chart
from varjet.geometry import geodesic_lagrangian, sphere_stereographic
from varjet.variation import Lagrangian

HALF = ex.num(Fraction(1, 2))


def random_expr(rng: random.Random, names, depth: int = 3) -> ex.Expr:
    """Random expression over the given symbols, domain-safe for [-2, 2]."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return ex.num(Fraction(rng.randint(-4, 4), rng.randint(1, 3)))
        return ex.sym(rng.choice(names))
    op = rng.choice(("add", "mul", "pow", "sin", "cos", "exp"))
    if op == "add":
        return ex.add(*[random_expr(rng, names, depth - 1) for _ in range(rng.randint(2, 3))])
    if op == "mul":
        return ex.mul(*[random_expr(rng, names, depth - 1) for _ in range(2)])
    if op == "pow":
        return ex.pow_(random_expr(rng, names, depth - 1), rng.randint(2, 3))
    if op == "exp":
        # keep exponents small so evaluation stays finite
        return ex.exp(ex.mul(ex.num(Fraction(1, 4)), random_expr(rng, names, depth - 1)))
    return ex.call(op, random_expr(rng, names, depth - 1))


@pytest.fixture(scope="session")
def free_particle():
    c = make_chart(1, 1, 2)
    return Lagrangian(c, HALF * c.sym("y_t") ** 2, 1)


@pytest.fixture(scope="session")
def harmonic_oscillator():
    c = make_chart(1, 1, 2, params=("omega",))
    w = c.sym("omega")
    return Lagrangian(c, HALF * c.sym("y_t") ** 2 - HALF * w**2 * c.sym("y") ** 2, 1)


@pytest.fixture(scope="session")
def scalar_field():
    c = make_chart(2, 1, 2, base=("t", "x"), fiber=("phi",), params=("mass",))
    mm = c.sym("mass")
    density = HALF * (c.sym("phi_t") ** 2 - c.sym("phi_x") ** 2) - HALF * mm**2 * c.sym("phi") ** 2
    return Lagrangian(c, density, 1)


@pytest.fixture(scope="session")
def beam():
    c = make_chart(1, 1, 4)
    return Lagrangian(c, HALF * c.sym("y_tt") ** 2, 2)


@pytest.fixture(scope="session")
def unit_sphere():
    return sphere_stereographic(1)


@pytest.fixture(scope="session")
def sphere_geodesic_lagrangian(unit_sphere):
    return geodesic_lagrangian(unit_sphere)


@pytest.fixture(scope="session")
def lagrangian_suite(free_particle, harmonic_oscillator, sphere_geodesic_lagrangian,
                     scalar_field, beam):
    return {
        "free particle": free_particle,
        "harmonic oscillator": harmonic_oscillator,
        "sphere geodesic": sphere_geodesic_lagrangian,
        "scalar field": scalar_field,
        "beam": beam,
    }
