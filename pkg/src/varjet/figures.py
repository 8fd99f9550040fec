"""Figure rendering for the report path.

All figures go to files (Agg backend); the CLI writes them next to the CSV
output when an output directory is given.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = [
    "fig_eigenvalue_track",
    "fig_trial",
    "fig_jacobi_field",
    "fig_curves",
]

_STYLE = {"linewidth": 1.4}


def _finish(fig, ax, path, xlabel, ylabel, title):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def fig_eigenvalue_track(ts, lam1, lam2, path, title="curvature block eigenvalues"):
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(ts, lam1, label="lambda 1", **_STYLE)
    ax.plot(ts, lam2, label="lambda 2", **_STYLE)
    _finish(fig, ax, path, "t", "eigenvalue", title)


def fig_trial(ts, fvals, integrand, path, title="trial deformation"):
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(ts, fvals, label="trial magnitude", **_STYLE)
    ax.plot(ts, integrand, label="quadratic form", **_STYLE)
    ax.axhline(0.0, color="k", linewidth=0.6)
    _finish(fig, ax, path, "t", "value", title)


def fig_jacobi_field(ts, fvals, t_star, path, title="perturbation along the solution"):
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(ts, fvals, label="normal component", **_STYLE)
    ax.axhline(0.0, color="k", linewidth=0.6)
    if t_star is not None:
        ax.axvline(t_star, color="crimson", linestyle="--", linewidth=1.0,
                   label=f"first zero t = {t_star:.6g}")
    _finish(fig, ax, path, "t", "component", title)


def fig_curves(curves: dict, path, title="curves in the chart"):
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    for name, (xs, ys) in curves.items():
        ax.plot(xs, ys, label=name, **_STYLE)
    ax.set_aspect("equal", adjustable="datalim")
    _finish(fig, ax, path, "x1", "x2", title)
