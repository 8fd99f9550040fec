"""Command-line front end.

Subcommands: ``derive`` (momenta, field equations, boundary form),
``jacobi`` (linearized equations and the tangency check), ``stability``
(trial integrals, verdicts, conjugate points, eigenvalue tracks),
``demo-sphere`` (the end-to-end geodesic stability workload) and
``selfcheck``.  Output is human-readable by default, ``--json`` switches to
a stable machine schema; with ``--out DIR`` the report path also writes CSV
tables and the matching figures.

Exit codes: 0 success, 1 check failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
from fractions import Fraction

import numpy as np

from . import expr as ex
from .charts import ChartError, SectionSamples, make_chart
from .geometry import (
    MetricChart,
    curvature_velocity_block,
    eigen2x2_symmetric,
    geodesic_lagrangian,
    negative_eigenvector,
    sphere_stereographic,
)
from .integrate import (
    conjugate_point_scan,
    drag_and_verify,
    geodesic_trajectory,
    rk4,
    simpson,
)
from .linearize import (
    first_order_linearization,
    jacobi_equations,
    jacobi_lagrangian,
    restrict_to_base_perturbation,
    tangency_defect,
)
from .parsing import ExprParseError, ProblemSpec, SpecFileError, parse_problem_file
from .stability import (
    EndpointError,
    TrialDeformation,
    hessian,
    second_variation,
    stability_integral,
    stability_verdict,
)
from .variation import (
    Lagrangian,
    boundary_form,
    euler_lagrange,
    first_variation,
    momenta,
)

TANGENCY_TRIALS = 100


def _fmt(v: float) -> str:
    return f"{v:.12g}"


class Report:
    """Accumulates human-readable lines and a machine dictionary."""

    def __init__(self, command: str):
        self.lines: list[str] = []
        self.data: dict = {"command": command, "checks": []}
        self.ok = True

    def line(self, text: str = ""):
        self.lines.append(text)

    @staticmethod
    def _plain(value):
        if isinstance(value, dict):
            return {k: Report._plain(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [Report._plain(v) for v in value]
        if isinstance(value, np.bool_):
            return bool(value)
        if isinstance(value, (np.floating, np.integer)):
            return value.item()
        return value

    def put(self, key: str, value):
        self.data[key] = self._plain(value)

    def check(self, name: str, ok: bool, detail: str = "", **extra):
        ok = bool(ok)
        self.ok = self.ok and ok
        entry = {"name": name, "ok": ok}
        entry.update(self._plain(extra))
        self.data["checks"].append(entry)
        status = "PASS" if ok else "FAIL"
        suffix = f": {detail}" if detail else ""
        self.lines.append(f"[{status}] {name}{suffix}")

    def emit(self, as_json: bool) -> int:
        self.data["ok"] = self.ok
        if as_json:
            print(json.dumps(self.data, sort_keys=True, indent=2))
        else:
            for ln in self.lines:
                print(ln)
            print(f"result: {'PASS' if self.ok else 'FAIL'}")
        return 0 if self.ok else 1


def _ensure_outdir(path: str | None) -> str | None:
    if path is None:
        return None
    os.makedirs(path, exist_ok=True)
    return path


def _write_csv(path: str, header: list[str], columns: list) -> None:
    data = np.column_stack(columns)
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.12g")


# ---------------------------------------------------------------------------
# derive
# ---------------------------------------------------------------------------


def cmd_derive(args, spec: ProblemSpec) -> int:
    rep = Report("derive")
    L = spec.lagrangian()
    mom = momenta(L)
    E = euler_lagrange(L)
    bnd = boundary_form(L)
    n, m = L.n, L.m

    rep.line(f"chart: base = {', '.join(L.chart.base)}; fiber = {', '.join(L.chart.fiber)}; "
             f"order = {L.order}")
    rep.line(f"density: {ex.to_sexpr(L.density)}")
    rep.line("momenta:")
    mom_json: dict = {"p": [], "p1": [], "p2": None}
    for i in range(n):
        rep.line(f"  p[{L.chart.fiber[i]}] = {ex.to_sexpr(mom.p[i])}")
        mom_json["p"].append(ex.to_sexpr(mom.p[i]))
    for i in range(n):
        row = []
        for mu in range(m):
            rep.line(f"  p[{L.chart.fiber[i]}]^{L.chart.base[mu]} = {ex.to_sexpr(mom.p1[i][mu])}")
            row.append(ex.to_sexpr(mom.p1[i][mu]))
        mom_json["p1"].append(row)
    if L.order == 2:
        mom_json["p2"] = []
        for i in range(n):
            block = []
            for mu in range(m):
                row = []
                for nu in range(mu, m):
                    rep.line(
                        f"  p[{L.chart.fiber[i]}]^{L.chart.base[mu]}{L.chart.base[nu]}"
                        f" = {ex.to_sexpr(mom.p2[i][mu][nu])}"
                    )
                    row.append(ex.to_sexpr(mom.p2[i][mu][nu]))
                block.append(row)
            mom_json["p2"].append(block)
    rep.line("field equations:")
    for i in range(n):
        rep.line(f"  E[{L.chart.fiber[i]}] = {ex.to_sexpr(E.components[i])}")
    rep.line("boundary form:")
    for mu in range(m):
        rep.line(f"  F^{L.chart.base[mu]} = {ex.to_sexpr(bnd[mu])}")
    rep.put("momenta", mom_json)
    rep.put("euler_lagrange", [ex.to_sexpr(c) for c in E.components])
    rep.put("boundary", [ex.to_sexpr(b) for b in bnd])

    rng = random.Random(spec.seed)
    ok = True
    for _ in range(3):
        X = []
        for i in range(n):
            terms = [ex.num(Fraction(rng.randint(-2, 2)))]
            for nm in list(L.chart.base) + list(L.chart.fiber):
                terms.append(ex.mul(ex.num(Fraction(rng.randint(-2, 2))), ex.sym(nm)))
            X.append(ex.add(*terms))
        try:
            first_variation(L, X, check=True, seed=spec.seed)
        except AssertionError:
            ok = False
    rep.check("first variation identity (3 random polynomial deformations)", ok)
    return rep.emit(args.json)


# ---------------------------------------------------------------------------
# jacobi
# ---------------------------------------------------------------------------


def cmd_jacobi(args, spec: ProblemSpec) -> int:
    rep = Report("jacobi")
    L = spec.lagrangian()
    jl = jacobi_lagrangian(L)
    eqs = jacobi_equations(L)
    n = L.n

    rep.line(f"induced density: {ex.to_sexpr(jl.density)}")
    rep.line("base equations:")
    for i in range(n):
        rep.line(f"  E[{L.chart.fiber[i]}] = {ex.to_sexpr(eqs.base_eq[i])}")
    rep.line("perturbation equations:")
    for i in range(n):
        rep.line(f"  P[{L.chart.fiber[i]}] = {ex.to_sexpr(eqs.perturbation_eq[i])}")
    rep.put("density", ex.to_sexpr(jl.density))
    rep.put("base_eq", [ex.to_sexpr(c) for c in eqs.base_eq])
    rep.put("perturbation_eq", [ex.to_sexpr(c) for c in eqs.perturbation_eq])

    defects = tangency_defect(L)
    if args.corrupt_momenta:
        # negative control: simulate a broken derivation
        defects = [ex.add(d, ex.mul(ex.num(Fraction(37, 100)),
                                    eqs.chart.z_jet(0),
                                    eqs.chart.jet(0, 0)))
                   for d in defects]
    ok = True
    for k, d in enumerate(defects):
        zk = d.is_exact_zero() or ex.is_zero(
            d, trials=TANGENCY_TRIALS, tol=spec.tol, seed=spec.seed
        )
        ok = ok and zk
    rep.check(
        f"tangency: perturbation equations match the prolonged action on the "
        f"field equations ({TANGENCY_TRIALS} points, tol {_fmt(spec.tol)})",
        ok,
    )

    if L.order == 1:
        fol = first_order_linearization(L)
        restricted = restrict_to_base_perturbation(eqs)
        ok_fol = True
        for k in range(n):
            d = ex.add(fol[k], ex.mul(ex.num(-1), restricted[k]))
            ok_fol = ok_fol and (
                d.is_exact_zero() or ex.is_zero(d, trials=TANGENCY_TRIALS, tol=spec.tol, seed=spec.seed)
            )
        rep.check("first-order expansion agrees with the base-dependent restriction", ok_fol)
    return rep.emit(args.json)


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


def _eigen_track(M: MetricChart, solution: SectionSamples, t0: float, t1: float, count: int = 201):
    H = curvature_velocity_block(M)
    ts = np.linspace(t0, t1, count)
    l1 = np.empty(count)
    l2 = np.empty(count)
    for j, t in enumerate(ts):
        b = solution.jet(float(t), 1)
        b.pop("__values__", None)
        Hv = [[ex.evaluate(H[a][c], b) for c in range(2)] for a in range(2)]
        l1[j], l2[j] = eigen2x2_symmetric(Hv, tol=1e-7)
    return ts, l1, l2


def cmd_stability(args, spec: ProblemSpec) -> int:
    rep = Report("stability")
    outdir = _ensure_outdir(args.out)
    L = spec.lagrangian()
    metric = spec.metric()
    if spec.solution_src is None:
        raise SpecFileError("stability needs a 'solution' entry in the problem file")
    chart2k = L.chart.extended(2 * L.order)
    solution = spec.solution(chart2k)
    panels = args.panels or spec.panels
    hstep = args.h or spec.h

    hs = hessian(L)
    rep.put("hessian_blocks", {
        "value_value": [[ex.to_sexpr(hs.a[k][i]) for i in range(L.n)] for k in range(L.n)],
        "value_derivative": [
            [[ex.to_sexpr(hs.b[i][k][al]) for al in range(L.m)] for k in range(L.n)]
            for i in range(L.n)
        ],
    })

    if spec.trial_src is not None:
        trial = spec.trial(chart2k)
        value = stability_integral(L, solution, trial, panels=panels)
        verdict = stability_verdict(value, trial.t1 - trial.t0)
        rep.line(
            f"stability integral over [{_fmt(trial.t0)}, {_fmt(trial.t1)}]: {_fmt(value)}"
        )
        rep.line(f"verdict: {verdict}")
        rep.put("integral", value)
        rep.put("verdict", verdict)
        rep.check("trial integral evaluated", True, f"{_fmt(value)} ({verdict})")
        if outdir:
            ts = np.linspace(trial.t0, trial.t1, 401)
            tname = L.chart.base[0]
            fvals = np.array([
                math.hypot(*[ex.evaluate(c, {tname: float(t)}) for c in trial.components])
                for t in ts
            ])
            sv = second_variation(L)
            sub = {}
            for s in sv.chart.z_symbols():
                if s.dfiber:
                    sub[s.name] = ex.ZERO
                else:
                    e = trial.components[s.index]
                    for _ in s.dbase:
                        e = ex.diff(e, tname)
                    sub[s.name] = e
            quad = ex.substitute(sv.quadratic, sub)
            qvals = np.empty(len(ts))
            for j, t in enumerate(ts):
                b = solution.jet(float(t), 1)
                b.pop("__values__", None)
                qvals[j] = ex.evaluate(quad, b)
            _write_csv(os.path.join(outdir, "trial.csv"), ["t", "magnitude", "quadratic_form"],
                       [ts, fvals, qvals])
            from .figures import fig_trial

            fig_trial(ts, fvals, qvals, os.path.join(outdir, "trial.png"))
            rep.line(f"wrote {os.path.join(outdir, 'trial.csv')} and trial.png")

    if metric is not None and metric.dim == 2:
        ts, l1, l2 = _eigen_track(metric, solution, spec.t0, spec.t1)
        rep.put("eigenvalues_final", [float(l1[-1]), float(l2[-1])])
        if outdir:
            _write_csv(os.path.join(outdir, "eigenvalues.csv"), ["t", "lambda1", "lambda2"],
                       [ts, l1, l2])
            from .figures import fig_eigenvalue_track

            fig_eigenvalue_track(ts, l1, l2, os.path.join(outdir, "eigenvalues.png"))
            rep.line(f"wrote {os.path.join(outdir, 'eigenvalues.csv')} and eigenvalues.png")
        # conjugate point scan seeded from the solution's initial data
        b0 = solution.jet(spec.t0, 1)
        x0 = [b0[metric.chart.fiber[i]] for i in range(2)]
        u0 = [b0[metric.chart.jet_name(i, (0,))] for i in range(2)]
        traj = geodesic_trajectory(metric, x0, u0, (spec.t0, spec.t1), hstep)
        Hv = [[ex.evaluate(curvature_velocity_block(metric)[a][c], b0) for c in range(2)]
              for a in range(2)]
        v0 = negative_eigenvector(Hv, tol=1e-7)
        tstar = conjugate_point_scan(metric, traj, v0)
        rep.put("conjugate_point", tstar)
        rep.line(f"conjugate point: {_fmt(tstar) if tstar is not None else 'none'}")
    return rep.emit(args.json)


# ---------------------------------------------------------------------------
# demo-sphere
# ---------------------------------------------------------------------------


def _sphere_trial(a: float, R: float):
    t = ex.sym("t")
    f = ex.sin(t * ex.num(1.0 / a))
    direction = (ex.cos(t * ex.num(1.0 / R)), ex.sin(t * ex.num(1.0 / R)))
    return TrialDeformation((f * direction[0], f * direction[1]), 0.0, a * math.pi)


def cmd_demo_sphere(args) -> int:
    rep = Report("demo-sphere")
    outdir = _ensure_outdir(args.out)
    R = args.radius
    if R <= 0:
        print("error: radius must be positive", file=sys.stderr)
        return 2
    M = sphere_stereographic(R if not float(R).is_integer() else int(R))
    L = geodesic_lagrangian(M)
    chart2 = L.chart.extended(2)
    hstep = args.h
    panels = args.panels
    rep.line(f"sphere radius {_fmt(R)}, equator workload")
    t = ex.sym("t")
    equator = SectionSamples.from_exprs(
        chart2, [ex.num(float(R)) * ex.cos(t * ex.num(1.0 / R)),
                 ex.num(float(R)) * ex.sin(t * ex.num(1.0 / R))]
    )

    # 1. curvature block eigenvalues along the equator
    H = curvature_velocity_block(M)
    worst = 0.0
    for k in range(20):
        tv = 2 * math.pi * R * k / 20 + 0.01
        b = equator.jet(tv, 1)
        b.pop("__values__", None)
        Hv = [[ex.evaluate(H[a][c], b) for c in range(2)] for a in range(2)]
        l1, l2 = eigen2x2_symmetric(Hv, tol=1e-7)
        worst = max(worst, abs(l1), abs(l2 + 1.0 / (R * R)))
    rep.check(
        f"curvature block eigenvalues (0, {_fmt(-1.0 / (R * R))}) at 20 equator points",
        worst <= 1e-9,
        f"max deviation {worst:.3e}",
        value=worst,
        tol=1e-9,
    )

    # 2. stability integrals
    a_values = [0.5 * R, 2.0 * R]
    if args.a is not None:
        a_values.append(args.a)
    integrals = []
    for a in a_values:
        trial = _sphere_trial(a, R)
        value = stability_integral(L, equator, trial, panels=panels)
        closed = (math.pi / (2 * a)) * (1.0 - (a * a) / (R * R))
        verdict = stability_verdict(value, trial.t1 - trial.t0)
        expect_verdict = (
            "marginal"
            if abs(a - R) < 1e-9
            else ("stable-trialwise" if a < R else "unstable")
        )
        ok = abs(value - closed) <= 1e-6 and verdict == expect_verdict
        rep.check(
            f"stability integral a={_fmt(a)}",
            ok,
            f"{_fmt(value)} (closed form {_fmt(closed)}), verdict {verdict}",
            value=value,
            expected=closed,
            verdict=verdict,
        )
        integrals.append((a, value, verdict))
        if outdir:
            ts = np.linspace(0.0, a * math.pi, 401)
            fvals = np.sin(ts / a)
            qvals = (np.cos(ts / a) / a) ** 2 - fvals**2 / (R * R)
            tag = _fmt(a)
            _write_csv(os.path.join(outdir, f"trial_a{tag}.csv"),
                       ["t", "f", "quadratic_form"], [ts, fvals, qvals])
            from .figures import fig_trial

            fig_trial(ts, fvals, qvals, os.path.join(outdir, f"trial_a{tag}.png"),
                      title=f"trial f = sin(t/{tag})")
    rep.put("integrals", [
        {"a": a, "value": v, "verdict": verdict} for a, v, verdict in integrals
    ])

    # 3. conjugate point
    traj = geodesic_trajectory(M, [float(R), 0.0], [0.0, 1.0],
                               (0.0, math.pi * R + 1.0), hstep)
    tstar = conjugate_point_scan(M, traj, [1.0, 0.0])
    ok = tstar is not None and abs(tstar - math.pi * R) <= 1e-3
    rep.check(
        "conjugate point along the equator",
        ok,
        f"t* = {_fmt(tstar) if tstar is not None else 'none'} "
        f"(expected {_fmt(math.pi * R)} within 1e-3)",
        value=tstar,
        expected=math.pi * R,
        tol=1e-3,
    )
    rep.put("conjugate_point", tstar)

    # 4. dragging by rotation flows, plus a negative control
    c = L.chart
    x1, x2 = c.sym("x1"), c.sym("x2")
    Rn = ex.num(float(R))
    fields = {
        "rotation about the pole axis": [ex.mul(ex.num(-1), x2), x1],
        "rotation tilting the equator": [
            x1 * x2 / Rn,
            (Rn**2 - x1**2 + x2**2) / (2 * Rn),
        ],
    }
    spanR = (0.0, 2 * math.pi * R)
    drag_res = {}
    ok_drag = True
    for name, X in fields.items():
        r = drag_and_verify(L, equator, X, 0.1, h=hstep, t_range=spanR)
        drag_res[name] = r
        ok_drag = ok_drag and r <= 1e-7
    control = drag_and_verify(L, equator, [x1, x2], 0.1, h=hstep, t_range=spanR)
    drag_res["radial dilation (control)"] = control
    ok_drag = ok_drag and control >= 1e-3
    details = "; ".join(f"{k}: {v:.3e}" for k, v in drag_res.items())
    rep.check("solution dragging (isometry flows <= 1e-7, control >= 1e-3)", ok_drag, details)
    rep.put("drag_residuals", {k: float(v) for k, v in drag_res.items()})

    if outdir:
        ts, l1, l2 = _eigen_track(M, equator, 0.0, 2 * math.pi * R)
        _write_csv(os.path.join(outdir, "eigenvalues.csv"), ["t", "lambda1", "lambda2"],
                   [ts, l1, l2])
        from .figures import fig_curves, fig_eigenvalue_track, fig_jacobi_field

        fig_eigenvalue_track(ts, l1, l2, os.path.join(outdir, "eigenvalues.png"))
        # normal perturbation component along the geodesic, with its first zero
        from .integrate import jacobi_field_track

        scan_ts, fvals, _ = jacobi_field_track(M, traj, [1.0, 0.0])
        _write_csv(os.path.join(outdir, "jacobi_field.csv"), ["t", "normal_component"],
                   [scan_ts, fvals])
        fig_jacobi_field(scan_ts, fvals, tstar, os.path.join(outdir, "jacobi_field.png"))
        traj.to_csv(os.path.join(outdir, "equator.csv"), ["x1", "x2", "u1", "u2"])
        curves = {"equator": (traj.states[:, 0], traj.states[:, 1])}
        from .integrate import _flow_system, flow_point

        sysf = _flow_system(c, fields["rotation tilting the equator"])
        dragged = np.array([
            flow_point(sysf, 2, traj.states[j, :2], 0.3, 1e-2)[0]
            for j in range(0, len(traj.ts), 40)
        ])
        curves["dragged geodesic"] = (dragged[:, 0], dragged[:, 1])
        fig_curves(curves, os.path.join(outdir, "curves.png"))
        rep.line(f"wrote CSV tables and figures under {outdir}")
    return rep.emit(args.json)


# ---------------------------------------------------------------------------
# selfcheck
# ---------------------------------------------------------------------------


def cmd_selfcheck(args) -> int:
    rep = Report("selfcheck")
    seed = args.seed
    half = ex.num(Fraction(1, 2))

    # expression core: canonical idempotence and derivative-vs-FD
    from .integrate import fd_gradient_check

    c = make_chart(1, 1, 2)
    y, u, t = c.sym("y"), c.sym("y_t"), c.sym("t")
    corpus = [y**3 + u * y, ex.sin(y) * u**2, ex.exp(y) - t * u, (1 + y**2) ** -2 * u]
    ok = all(ex.simplify(ex.simplify(e)) == ex.simplify(e) for e in corpus)
    rep.check("expressions: canonical form idempotent", ok)
    w = fd_gradient_check(corpus, c, samples=40, seed=seed)
    rep.check("expressions: derivative vs finite difference <= 1e-5", w <= 1e-5,
              f"max relative error {w:.3e}")

    # charts: total derivatives commute
    c3 = make_chart(2, 1, 3)
    e = c3.sym("y") * ex.cos(c3.sym("y_t")) + c3.sym("y_x") ** 2
    comm = c3.total_derivative(c3.total_derivative(e, "t"), "x") == c3.total_derivative(
        c3.total_derivative(e, "x"), "t"
    )
    rep.check("charts: total derivatives commute", comm)

    # variational split and the beam equation
    L_free = Lagrangian(c, half * u**2, 1)
    try:
        first_variation(L_free, [ex.num(1) + y], check=True, seed=seed)
        ok = True
    except AssertionError:
        ok = False
    rep.check("variation: first-variation identity", ok)
    cb = make_chart(1, 1, 4)
    L_beam = Lagrangian(cb, half * cb.sym("y_tt") ** 2, 2)
    rep.check(
        "variation: fourth-order field equation of the curvature-squared density",
        euler_lagrange(L_beam).components[0] == cb.sym("y_tttt"),
    )

    # linearized equations tangent to the field equations
    ch = make_chart(1, 1, 2, params=("omega",))
    w_ = ch.sym("omega")
    L_ho = Lagrangian(ch, half * ch.sym("y_t") ** 2 - half * w_**2 * ch.sym("y") ** 2, 1)
    ok = True
    for L_ in (L_free, L_ho, L_beam):
        for d in tangency_defect(L_):
            ok = ok and (d.is_exact_zero() or ex.is_zero(d, trials=50, tol=1e-10, seed=seed))
    if args.inject_fault:
        ok = False
    rep.check("linearization: tangency identity", ok)

    # second variation quadratic reconstruction
    sv = second_variation(L_ho)
    hs = hessian(L_ho)
    d = ex.add(sv.quadratic, ex.mul(ex.num(-1), hs.quadratic(sv.chart)))
    rep.check(
        "stability: bilinear form reconstructs the quadratic part",
        d.is_exact_zero() or ex.is_zero(d, trials=50, tol=1e-10, seed=seed),
    )

    # integrator orders
    from .integrate import ode_system

    sysho = ode_system(["y", "v"], [ex.sym("v"), ex.mul(ex.num(-1), ex.sym("y"))])

    def err(h):
        tr = rk4(sysho, [0.0, 1.0], (0.0, 2.0), h)
        return abs(tr.states[-1][0] - math.sin(2.0))

    ratio = err(0.02) / err(0.01)
    rep.check("integration: fourth-order step-halving ratio in [14, 18]",
              14.0 <= ratio <= 18.0, f"ratio {ratio:.2f}")

    def serr(n):
        exact = (math.exp(1.5) * (math.cos(3.0) + 2 * math.sin(3.0))) / 5 - 1 / 5
        return abs(simpson(lambda x: math.exp(x) * math.cos(2 * x), 0.0, 1.5, n) - exact)

    sratio = serr(64) / serr(128)
    rep.check("quadrature: fourth-order panel-doubling ratio in [14, 18]",
              14.0 <= sratio <= 18.0, f"ratio {sratio:.2f}")
    return rep.emit(args.json)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="varjet",
        description="Variational calculus on jet bundles: field equations, "
        "linearized perturbation equations, and stability analysis.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec_required=True):
        if spec_required:
            sp.add_argument("--spec", required=True, help="problem file path")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--seed", type=int, default=0, help="random seed for checks")
        sp.add_argument("--out", default=None, help="directory for CSV tables and figures")

    sp = sub.add_parser("derive", help="momenta, field equations, boundary form")
    common(sp)
    sp = sub.add_parser("jacobi", help="linearized equations and the tangency check")
    common(sp)
    sp.add_argument("--tol", type=float, default=None, help="zero-test tolerance")
    sp.add_argument("--corrupt-momenta", action="store_true",
                    help="inject a corrupted term (negative control; must FAIL)")
    sp = sub.add_parser("stability", help="trial integrals, verdicts, conjugate points")
    common(sp)
    sp.add_argument("--panels", type=int, default=None, help="Simpson panels")
    sp.add_argument("--h", type=float, default=None, help="integrator step")
    sp.add_argument("--tol", type=float, default=None, help="zero-test tolerance")
    sp = sub.add_parser("demo-sphere", help="end-to-end geodesic stability workload")
    common(sp, spec_required=False)
    sp.add_argument("--radius", type=float, default=1.0, help="sphere radius")
    sp.add_argument("--a", type=float, default=None,
                    help="extra trial scale: f = sin(t/a) on [0, a*pi]")
    sp.add_argument("--panels", type=int, default=10_000)
    sp.add_argument("--h", type=float, default=1e-3)
    sp = sub.add_parser("selfcheck", help="run the module invariant suites")
    common(sp, spec_required=False)
    sp.add_argument("--inject-fault", action="store_true",
                    help="force one failure (negative control)")
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0,) else 0
    try:
        if args.command == "derive":
            spec = parse_problem_file(args.spec)
            if args.seed:
                spec.seed = args.seed
            return cmd_derive(args, spec)
        if args.command == "jacobi":
            spec = parse_problem_file(args.spec)
            if args.seed:
                spec.seed = args.seed
            if getattr(args, "tol", None):
                spec.tol = args.tol
            return cmd_jacobi(args, spec)
        if args.command == "stability":
            spec = parse_problem_file(args.spec)
            if args.seed:
                spec.seed = args.seed
            return cmd_stability(args, spec)
        if args.command == "demo-sphere":
            return cmd_demo_sphere(args)
        return cmd_selfcheck(args)
    except (SpecFileError, ExprParseError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ChartError, EndpointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
