"""Fixed-step integration, quadrature, flow dragging and conjugate points.

Everything here is deterministic: classical RK4 with a fixed step, composite
Simpson quadrature, and flows integrated with the same RK4 error model.
Right-hand sides are compiled expression lists for speed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .charts import ChartError, JetChart, SectionSamples
from .geometry import MetricChart, christoffel, curvature_velocity_block, riemann
from .variation import Lagrangian, euler_lagrange

__all__ = [
    "OdeSystem",
    "Trajectory",
    "NonFiniteStateError",
    "FlowLeftChartError",
    "ode_system",
    "rk4",
    "simpson",
    "geodesic_system",
    "geodesic_trajectory",
    "drag_and_verify",
    "jacobi_field_track",
    "conjugate_point_scan",
    "fd_gradient_check",
]

CHART_GUARD = 1e3  # coordinate magnitude treated as leaving the chart


class NonFiniteStateError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"integration produced a non-finite state at t={t:.9g}")
        self.t = t


class FlowLeftChartError(RuntimeError):
    pass


@dataclass(frozen=True)
class OdeSystem:
    """A first-order system with a compiled right-hand side over (t, state)."""

    names: tuple
    exprs: tuple
    rhs: object  # callable (t, *state) -> list[float]

    @property
    def dim(self) -> int:
        return len(self.names)

    def __call__(self, t: float, y) -> list[float]:
        return self.rhs(t, *y)


def ode_system(state_names, rhs_exprs, tname: str = "t", params: dict | None = None) -> OdeSystem:
    """Compile expressions over (time, state symbols) into an ODE system."""
    exprs = [ex._as_expr(e) for e in rhs_exprs]
    if params:
        exprs = [ex.substitute(e, {k: ex.num(v) for k, v in params.items()}) for e in exprs]
    fn = ex.compile_exprs(exprs, [tname, *state_names])
    return OdeSystem(tuple(state_names), tuple(exprs), fn)


@dataclass(frozen=True)
class Trajectory:
    """Uniform-grid samples of a first-order system with stored derivatives.

    Interpolation between nodes is cubic Hermite using the stored
    right-hand-side values.
    """

    ts: np.ndarray
    states: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        if len(self.ts) < 2:
            raise ValueError("a trajectory needs at least two samples")
        if not np.all(np.diff(self.ts) > 0):
            raise ValueError("trajectory grid must be strictly increasing")

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t1(self) -> float:
        return float(self.ts[-1])

    @property
    def h(self) -> float:
        return float(self.ts[1] - self.ts[0])

    def state(self, t: float) -> np.ndarray:
        """Cubic Hermite interpolation of the state at time ``t``."""
        ts = self.ts
        if t <= ts[0]:
            j = 0
        elif t >= ts[-1]:
            j = len(ts) - 2
        else:
            j = int((t - ts[0]) / self.h)
            j = min(max(j, 0), len(ts) - 2)
        h = ts[j + 1] - ts[j]
        s = (t - ts[j]) / h
        y0, y1 = self.states[j], self.states[j + 1]
        d0, d1 = self.derivs[j] * h, self.derivs[j + 1] * h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1

    def to_csv(self, path, state_names=None):
        names = state_names or [f"y{k}" for k in range(self.states.shape[1])]
        header = ",".join(["t", *names])
        data = np.column_stack([self.ts, self.states])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.12g")


def rk4(sys: OdeSystem, y0, t_span: tuple[float, float], h: float) -> Trajectory:
    """Classical fixed-step fourth-order integration over ``t_span``.

    The step is shrunk slightly if needed so the grid lands exactly on the
    endpoint; global error is O(h^4).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if h <= 0:
        raise ValueError("step must be positive")
    if t1 <= t0:
        raise ValueError("empty integration span")
    nsteps = max(1, int(np.ceil((t1 - t0) / h - 1e-12)))
    h = (t1 - t0) / nsteps
    dim = sys.dim
    ts = np.empty(nsteps + 1)
    ys = np.empty((nsteps + 1, dim))
    ds = np.empty((nsteps + 1, dim))
    y = np.asarray(y0, dtype=float).copy()
    if y.shape != (dim,):
        raise ValueError(f"initial state must have dimension {dim}")
    t = t0
    ts[0] = t
    ys[0] = y
    ds[0] = sys(t, y)
    for k in range(nsteps):
        k1 = np.asarray(sys(t, y))
        k2 = np.asarray(sys(t + h / 2, y + h / 2 * k1))
        k3 = np.asarray(sys(t + h / 2, y + h / 2 * k2))
        k4 = np.asarray(sys(t + h, y + h * k3))
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (k + 1) * h
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError(t)
        ts[k + 1] = t
        ys[k + 1] = y
        ds[k + 1] = sys(t, y)
    return Trajectory(ts, ys, ds)


def simpson(f, a: float, b: float, n: int) -> float:
    """Composite Simpson quadrature with ``n`` even panels; exact for cubics."""
    if n < 2 or n % 2:
        raise ValueError("Simpson quadrature needs an even panel count >= 2")
    xs = np.linspace(a, b, n + 1)
    vals = np.array([f(float(x)) for x in xs])
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((b - a) / (3 * n) * np.dot(w, vals))


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------


def geodesic_system(M: MetricChart) -> OdeSystem:
    """First-order system (positions, velocities) for affine geodesics."""
    n = M.dim
    c = M.chart
    G = christoffel(M)
    u = [c.jet(k, 0) for k in range(n)]
    acc = [
        ex.add(
            *[
                ex.mul(ex.num(-1), G[l][a][b], u[a], u[b])
                for a in range(n)
                for b in range(n)
            ]
        )
        for l in range(n)
    ]
    names = [c.fiber[i] for i in range(n)] + [c.jet_name(k, (0,)) for k in range(n)]
    exprs = u + acc
    fn = ex.compile_exprs(exprs, ["t", *names])
    return OdeSystem(tuple(names), tuple(exprs), fn)


def geodesic_trajectory(
    M: MetricChart, x0, u0, t_span: tuple[float, float], h: float = 1e-3
) -> Trajectory:
    sys = geodesic_system(M)
    y0 = list(x0) + list(u0)
    return rk4(sys, y0, t_span, h)


def trajectory_section(M: MetricChart, traj: Trajectory) -> SectionSamples:
    """Adapt a geodesic trajectory to section samples with analytic jets."""
    n = M.dim
    sys = geodesic_system(M)

    def vals(t):
        return list(traj.state(t)[:n])

    def d1(t):
        return list(traj.state(t)[n:])

    def d2(t):
        st = traj.state(t)
        return list(sys(t, st))[n:]

    return SectionSamples.from_callable(M.chart, vals, [d1, d2])


def energy_drift(M: MetricChart, traj: Trajectory) -> float:
    """Max relative drift of the kinetic first integral along a trajectory."""
    n = M.dim
    names = [M.chart.fiber[i] for i in range(n)]
    gfn = ex.compile_exprs([M.g[a][b] for a in range(n) for b in range(n)], names)
    vals = []
    for row in traj.states:
        g = gfn(*row[:n])
        u = row[n:]
        e = 0.5 * sum(g[a * n + b] * u[a] * u[b] for a in range(n) for b in range(n))
        vals.append(e)
    vals = np.array(vals)
    scale = max(abs(vals[0]), 1e-30)
    return float(np.max(np.abs(vals - vals[0])) / scale)


# ---------------------------------------------------------------------------
# flow dragging
# ---------------------------------------------------------------------------


def _flow_system(chart: JetChart, X_components) -> OdeSystem:
    """Flow of a position-dependent vertical field with first and second
    tangent maps: state (y, J, K) with J the Jacobian and K the Hessian of
    the flow map."""
    n = len(chart.fiber)
    fib = list(chart.fiber)
    X = [ex._as_expr(e) for e in X_components]
    for e in X:
        chart.validate(e, max_order=0, allow_z=False)
    dX = [[ex.diff(X[i], fib[k]) for k in range(n)] for i in range(n)]
    d2X = [[[ex.diff(dX[i][k], fib[l]) for l in range(n)] for k in range(n)] for i in range(n)]

    names = list(fib)
    for i in range(n):
        for j in range(n):
            names.append(f"_J_{i}_{j}")
    for i in range(n):
        for j in range(n):
            for k in range(n):
                names.append(f"_K_{i}_{j}_{k}")
    J = [[ex.sym(f"_J_{i}_{j}") for j in range(n)] for i in range(n)]
    K = [[[ex.sym(f"_K_{i}_{j}_{k}") for k in range(n)] for j in range(n)] for i in range(n)]

    exprs = list(X)
    for i in range(n):
        for j in range(n):
            exprs.append(ex.add(*[ex.mul(dX[i][l], J[l][j]) for l in range(n)]))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                terms = [ex.mul(dX[i][l], K[l][j][k]) for l in range(n)]
                for l in range(n):
                    for m_ in range(n):
                        terms.append(ex.mul(d2X[i][l][m_], J[l][j], J[m_][k]))
                exprs.append(ex.add(*terms))
    fn = ex.compile_exprs(exprs, ["t", *names])
    return OdeSystem(tuple(names), tuple(exprs), fn)


def flow_point(sysf: OdeSystem, n: int, y, s: float, h: float):
    """Flow a point to parameter ``s``; returns (y_s, J_s, K_s)."""
    state0 = list(y) + [0.0] * (n * n + n * n * n)
    for i in range(n):
        state0[n + i * n + i] = 1.0
    if s == 0.0:
        traj = None
        final = np.asarray(state0)
    else:
        span = (0.0, abs(s))
        sys_eff = sysf
        if s < 0:
            neg = ex.compile_exprs(
                [ex.mul(ex.num(-1), e) for e in sysf.exprs], ["t", *sysf.names]
            )
            sys_eff = OdeSystem(sysf.names, sysf.exprs, neg)
        traj = rk4(sys_eff, state0, span, h)
        final = traj.states[-1]
    ypos = final[:n]
    if np.max(np.abs(ypos)) > CHART_GUARD:
        raise FlowLeftChartError("dragged point approached the chart boundary")
    J = final[n : n + n * n].reshape(n, n)
    K = final[n + n * n :].reshape(n, n, n)
    return ypos, J, K


def drag_and_verify(
    L: Lagrangian,
    solution: SectionSamples,
    X_components,
    s: float,
    h: float = 1e-3,
    t_range: tuple[float, float] | None = None,
    samples: int = 41,
) -> float:
    """Max field-equation residual of a solution dragged by a vertical flow.

    Each sampled point of the solution flows to parameter ``s`` along the
    field; first and second time derivatives of the dragged curve come from
    the tangent and second-tangent maps of the flow.  For a field whose
    prolongation is tangent to the field equations, the dragged curve is
    again a solution and the residual stays at integration-error level.
    """
    if L.order != 1 or len(L.chart.base) != 1:
        raise ChartError("flow dragging is implemented for order-1 mechanics systems")
    n = L.n
    E = euler_lagrange(L)
    sysf = _flow_system(L.chart, X_components)
    if t_range is None:
        t_range = (0.0, 2.0 * np.pi)
    worst = 0.0
    comp_names = [E.chart.base[0]]
    for i in range(n):
        comp_names += [E.chart.fiber[i], E.chart.jet_name(i, (0,)), E.chart.jet_name(i, (0, 0))]
    Efn = ex.compile_exprs(list(E.components), comp_names)
    for j in range(samples):
        t = t_range[0] + (t_range[1] - t_range[0]) * j / (samples - 1)
        b = solution.jet(t, 2)
        y = [b[E.chart.fiber[i]] for i in range(n)]
        yd = [b[E.chart.jet_name(i, (0,))] for i in range(n)]
        ydd = [b[E.chart.jet_name(i, (0, 0))] for i in range(n)]
        ypos, J, K = flow_point(sysf, n, y, s, h)
        zd = J @ np.asarray(yd)
        zdd = J @ np.asarray(ydd) + np.einsum("ijk,j,k->i", K, yd, yd)
        args = [t]
        for i in range(n):
            args += [ypos[i], zd[i], zdd[i]]
        res = Efn(*args)
        worst = max(worst, max(abs(v) for v in res))
    return worst


# ---------------------------------------------------------------------------
# conjugate points
# ---------------------------------------------------------------------------


def jacobi_field_track(M: MetricChart, geodesic: Trajectory, v0):
    """Integrate the linearized geodesic equation along a geodesic.

    Starts from a vanishing perturbation with covariant velocity ``v0`` and
    returns ``(ts, f, fdot)`` where ``f`` is the component of the
    perturbation along the parallel transport of ``v0``.
    """
    n = M.dim
    v0 = np.asarray(v0, dtype=float)
    if not np.any(v0):
        raise ValueError("initial perturbation velocity must be nonzero")
    c = M.chart
    curv = riemann(M)
    G = curv.christoffel
    H = curvature_velocity_block(M, curv)
    u_names = [c.jet_name(k, (0,)) for k in range(n)]
    Xs = [f"_X{k}" for k in range(n)]
    Ws = [f"_W{k}" for k in range(n)]
    es = [f"_e{k}" for k in range(n)]
    names = [c.fiber[i] for i in range(n)] + u_names + Xs + Ws + es
    X = [ex.sym(nm) for nm in Xs]
    W = [ex.sym(nm) for nm in Ws]
    e_ = [ex.sym(nm) for nm in es]
    u = [ex.sym(nm) for nm in u_names]

    def gamma_contract(vec):
        return [
            ex.add(
                *[ex.mul(G[l][a][b], u[a], vec[b]) for a in range(n) for b in range(n)]
            )
            for l in range(n)
        ]

    acc = [ex.mul(ex.num(-1), t) for t in gamma_contract(u)]
    # raised curvature action: (grad_u grad_u X)^a = g^{ab} H_{bs} X^s
    HX = [
        ex.add(
            *[
                ex.mul(M.g_inv[a][b], H[b][s_], X[s_])
                for b in range(n)
                for s_ in range(n)
            ]
        )
        for a in range(n)
    ]
    gw = gamma_contract(W)
    gX = gamma_contract(X)
    ge = gamma_contract(e_)
    exprs = (
        [u[k] for k in range(n)]
        + acc
        + [ex.add(W[k], ex.mul(ex.num(-1), gX[k])) for k in range(n)]
        + [ex.add(HX[k], ex.mul(ex.num(-1), gw[k])) for k in range(n)]
        + [ex.mul(ex.num(-1), ge[k]) for k in range(n)]
    )
    fn = ex.compile_exprs(exprs, ["t", *names])
    sys = OdeSystem(tuple(names), tuple(exprs), fn)

    x0 = geodesic.states[0][:n]
    u0 = geodesic.states[0][n:]
    g0 = np.array(M.evaluate(x0))
    e0 = v0 / np.sqrt(v0 @ g0 @ v0)
    y0 = np.concatenate([x0, u0, np.zeros(n), v0, e0])
    traj = rk4(sys, y0, (geodesic.t0, geodesic.t1), geodesic.h)

    gfn = ex.compile_exprs(
        [M.g[a][b] for a in range(n) for b in range(n)], [c.fiber[i] for i in range(n)]
    )

    def f_and_df(state):
        pos = state[:n]
        Xv = state[2 * n : 3 * n]
        Wv = state[3 * n : 4 * n]
        ev = state[4 * n : 5 * n]
        g = np.array(gfn(*pos)).reshape(n, n)
        return float(Xv @ g @ ev), float(Wv @ g @ ev)

    fs = np.empty(len(traj.ts))
    dfs = np.empty(len(traj.ts))
    for j in range(len(traj.ts)):
        fs[j], dfs[j] = f_and_df(traj.states[j])
    return traj.ts, fs, dfs


def conjugate_point_scan(
    M: MetricChart,
    geodesic: Trajectory,
    v0,
    bisect_tol: float = 1e-6,
) -> float | None:
    """First vanishing of a perturbation field seeded with zero value.

    Integrates the linearized geodesic equation along the given geodesic
    with ``X(t0) = 0`` and covariant velocity ``v0``, tracking the component
    of ``X`` along the parallel-transported direction of ``v0``.  The first
    interior sign change is refined on the cubic Hermite interpolant to
    ``bisect_tol``; returns ``None`` when no zero lies in the span.
    """
    ts, fs, dfs = jacobi_field_track(M, geodesic, v0)

    started = False
    sign0 = 0.0
    for j in range(1, len(ts)):
        if not started:
            if abs(fs[j]) > 1e-9 * max(1.0, float(np.max(np.abs(fs[: j + 1])))):
                started = True
                sign0 = np.sign(fs[j])
            continue
        if fs[j] == 0.0 or np.sign(fs[j]) != sign0:
            a, b = ts[j - 1], ts[j]
            fa, fb = fs[j - 1], fs[j]
            da, db = dfs[j - 1] * (b - a), dfs[j] * (b - a)

            def hermite(t):
                sloc = (t - a) / (b - a)
                h00 = (1 + 2 * sloc) * (1 - sloc) ** 2
                h10 = sloc * (1 - sloc) ** 2
                h01 = sloc * sloc * (3 - 2 * sloc)
                h11 = sloc * sloc * (sloc - 1)
                return h00 * fa + h10 * da + h01 * fb + h11 * db

            lo, hi = float(a), float(b)
            flo = hermite(lo)
            for _ in range(200):
                if hi - lo <= bisect_tol:
                    break
                mid = 0.5 * (lo + hi)
                fm = hermite(mid)
                if fm == 0.0:
                    lo = hi = mid
                    break
                if np.sign(fm) == np.sign(flo):
                    lo = mid
                    flo = fm
                else:
                    hi = mid
            return 0.5 * (lo + hi)
    return None


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------


def fd_gradient_check(
    exprs,
    chart: JetChart,
    samples: int = 50,
    seed: int = 0,
    h: float = 1e-6,
) -> float:
    """Max relative error between stored-coordinate partials and central
    finite differences, over random points; a single scalar for gate checks."""
    rng = random.Random(seed)
    exprs = [ex._as_expr(e) for e in exprs]
    worst = 0.0
    for _ in range(samples):
        e = exprs[rng.randrange(len(exprs))]
        names = sorted(ex.free_symbols(e))
        if not names:
            continue
        for attempt in range(100):
            b = {nm: rng.uniform(-2.0, 2.0) for nm in names}
            s = names[rng.randrange(len(names))]
            try:
                d = ex.evaluate(chart.partial_raw(e, s), b)
                bp = dict(b)
                bm = dict(b)
                bp[s] += h
                bm[s] -= h
                fd = (ex.evaluate(e, bp) - ex.evaluate(e, bm)) / (2 * h)
            except ex.DomainError:
                continue
            worst = max(worst, abs(d - fd) / (1.0 + abs(d)))
            break
    return worst
