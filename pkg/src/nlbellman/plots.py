"""Figure rendering for the report path.

Every CLI command that emits a CSV table also renders a matching PNG next to
it (unless plots are disabled).  The delimited files remain the artifacts of
record; figures are a convenience rendering of the same data.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

def _save(fig, path, config_hash=None):
    # fixed metadata keeps the PNG bytes independent of the mpl build and of
    # wall-clock state; the config hash rides along for provenance
    meta = {"Software": None}
    if config_hash is not None:
        meta["Description"] = f"config_hash={config_hash}"
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=meta)
    plt.close(fig)


def plot_solution(solution, path, config_hash=None) -> None:
    u = solution.field
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    if u.dimension == 1:
        x = u.axis_coords()
        ax.plot(x, u.values, lw=1.2)
        for edge in (-1.0, 1.0):
            ax.axvline(edge, color="0.7", ls="--", lw=0.8)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        im = ax.imshow(
            u.values.T, origin="lower",
            extent=[-u.box_radius, u.box_radius, -u.box_radius, u.box_radius],
        )
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_title("solution")
    ax2.semilogy(np.arange(1, len(solution.residual_history) + 1),
                 np.maximum(solution.residual_history, 1e-17), marker="o", lw=1.0)
    ax2.set_xlabel("policy iteration")
    ax2.set_ylabel("sup |residual|")
    ax2.set_title("convergence")
    _save(fig, path, config_hash)


def plot_symbol_curves(curves_by_kernel, sigma, path, config_hash=None) -> None:
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    for label, curve in curves_by_kernel:
        mags = np.array([np.linalg.norm(xi) for xi in curve.xi_samples])
        s = np.asarray(curve.s_values)
        ax.loglog(mags, s, marker=".", lw=1.0, label=label)
        ax2.semilogx(mags, s / mags**sigma, marker=".", lw=1.0, label=label)
    ax.set_xlabel(r"$|\xi|$")
    ax.set_ylabel(r"$s(\xi)$")
    ax.set_title("symbol")
    ax2.set_xlabel(r"$|\xi|$")
    ax2.set_ylabel(r"$s(\xi)/|\xi|^\sigma$")
    ax2.set_title("power comparability")
    ax2.legend(fontsize=7)
    _save(fig, path, config_hash)


def plot_diagnostics(points, A_vals, P_vals, N_vals, holder, path, config_hash=None) -> None:
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    r = np.sqrt(np.sum(np.asarray(points) ** 2, axis=1))
    order = np.argsort(r)
    ax.plot(r[order], np.asarray(A_vals)[order], ".", ms=3, label="absolute mass")
    ax.plot(r[order], np.asarray(P_vals)[order], ".", ms=3, label="P")
    ax.plot(r[order], np.asarray(N_vals)[order], ".", ms=3, label="N")
    ax.set_xlabel("|x|")
    ax.legend(fontsize=7)
    ax.set_title("pointwise diagnostics")
    radii = np.asarray(holder.radii)
    oscs = np.asarray(holder.oscillations)
    if np.all(oscs > 0):
        ax2.loglog(radii, oscs, "o", ms=4)
        if not holder.unresolved:
            ax2.loglog(radii, holder.C * radii**holder.alpha, "--", lw=1.0,
                       label=f"fit: alpha={holder.alpha:.3f}")
            ax2.legend(fontsize=7)
    ax2.set_xlabel("r")
    ax2.set_ylabel("oscillation of the fractional Laplacian")
    ax2.set_title("Holder fit" + (" (unresolved)" if holder.unresolved else ""))
    _save(fig, path, config_hash)


def plot_sweep(rows, path, config_hash=None) -> None:
    solved = [row for row in rows if row.solved]
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    if solved:
        s = [row.sigma for row in solved]
        ax.plot(s, [row.max_abs_mass_ratio for row in solved], "o-", lw=1.0)
        ax.set_xlabel(r"$\sigma$")
        ax.set_ylabel(r"$\max_x A(x)/\|u\|_\infty$")
        ax.set_title("absolute-mass stability")
        alphas = [(row.sigma, row.holder_alpha) for row in solved if row.holder_alpha is not None]
        if alphas:
            ax2.plot(*zip(*alphas), "o-", lw=1.0)
        ax2.set_xlabel(r"$\sigma$")
        ax2.set_ylabel(r"fitted $\alpha$")
        ax2.set_title("Holder exponent across orders")
    _save(fig, path, config_hash)


def plot_check(rows, path, config_hash=None) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 0.42 * max(6, len(rows))))
    names = [r[0] for r in rows]
    ok = [1.0 if r[1] == "pass" else 0.0 for r in rows]
    colors = ["#2a9d38" if v else "#c43c31" for v in ok]
    ax.barh(range(len(rows)), [1.0] * len(rows), color=colors, height=0.62)
    for i, name in enumerate(names):
        ax.text(0.02, i, name, va="center", fontsize=7, color="white")
    ax.set_yticks([])
    ax.set_xticks([])
    ax.set_title("property checks")
    _save(fig, path, config_hash)
