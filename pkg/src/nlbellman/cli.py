"""Command-line entry point: solve, sweep, symbol, diagnose, check.

One JSON config document drives each run; ``--out``, ``--seed`` and
``--threads`` override the corresponding knobs.  Every run writes delimited
tables plus JSON reports (and PNG renderings of the same data unless plots
are disabled), all stamped with the config hash.  Exit codes: 0 success,
1 failed checks, 2 invalid configuration, 3 solver nonconvergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import plots, report
from .closures import make_closure
from .config import DEFAULT_CONFIG, ScenarioConfig
from .errors import ConfigurationError, NonconvergenceError, ValidationError
from .fieldio import export_field, import_field
from .fields import ScalarField, average
from .kernels import (EllipticityBounds, classify_kernel, make_power_kernel,
                      make_radial_kernel, regularize_kernel, symmetrize)
from .operators import evaluate_linear, evaluate_pucci
from .quadrature import field_plan
from .regularity import compute_P_N, compute_w_A, diagnose_field, half_ball_plan, sigma_sweep
from .solver import discretize, solve_dirichlet
from .symbol import comparability_fit, symbol


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlbellman",
        description="evaluate, solve, and diagnose concave nonlocal Bellman equations",
    )
    parser.add_argument("command", choices=("solve", "sweep", "symbol", "diagnose", "check"))
    parser.add_argument("--config", help="path to the scenario JSON (default: built-in scenario)")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("--seed", type=int, help="RNG seed override")
    parser.add_argument("--threads", type=int, default=1, help="workers for independent sweep entries")
    parser.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    args = parser.parse_args(argv)

    try:
        if args.config:
            config = ScenarioConfig.from_file(args.config)
        else:
            doc = json.loads(json.dumps(DEFAULT_CONFIG))
            config = ScenarioConfig.from_dict(doc)
        return run_scenario(config, command=args.command, out=args.out, seed=args.seed,
                            threads=args.threads, render_plots=not args.no_plots)
    except (ConfigurationError, ValidationError) as exc:
        _emit_error("invalid-config", exc)
        return 2
    except NonconvergenceError as exc:
        _emit_error("nonconvergence", exc, extra={"residual_history": exc.residual_history})
        return 3


def _emit_error(kind: str, exc: Exception, extra: dict | None = None):
    payload = {"error": {"type": kind, "message": str(exc)}}
    if extra:
        payload["error"].update(extra)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def run_scenario(config: ScenarioConfig, command: str | None = None, out: str | None = None,
                 seed: int | None = None, threads: int = 1, render_plots: bool | None = None) -> int:
    """Dispatch a validated config; returns the process exit code."""
    command = command or config.command
    outdir = out or config.output_dir
    seed = config.seed if seed is None else seed
    do_plots = config.plots if render_plots is None else (render_plots and config.plots)
    os.makedirs(outdir, exist_ok=True)
    runner = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "symbol": _cmd_symbol,
        "diagnose": _cmd_diagnose,
        "check": _cmd_check,
    }[command]
    return runner(config, outdir, seed, threads, do_plots)


def _path(outdir, name):
    return os.path.join(outdir, name)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _cmd_solve(config, outdir, seed, threads, do_plots) -> int:
    problem = config.build_problem(config.sigma)
    sol = solve_dirichlet(problem, config.scheme, tol=config.solve_tol,
                          max_iter=config.max_iterations)
    export_field(sol.field, _path(outdir, "solution.field"), config_hash=config.config_hash)
    report.write_csv(
        _path(outdir, "residual_history.csv"),
        ["iteration", "residual_sup"],
        [(i + 1, r) for i, r in enumerate(sol.residual_history)],
        config.config_hash,
    )
    st_pts = sol.field.grid_points()[sol.field.interior_node_indices(1.0)]
    coord_names = ["x", "y"][: config.dimension]
    report.write_csv(
        _path(outdir, "policy.csv"),
        coord_names + ["control_index"],
        [tuple(p) + (int(a),) for p, a in zip(st_pts, sol.policy.indices)],
        config.config_hash,
    )
    report.write_json(
        _path(outdir, "solve_report.json"),
        {
            "sigma": config.sigma,
            "residual_sup": sol.residual_sup,
            "iterations": sol.iterations,
            "residual_history": list(sol.residual_history),
            "max_principle_constant": sol.max_principle_constant,
            "sup_norm": sol.field.sup_norm,
            "policy_counts": np.bincount(
                sol.policy.indices, minlength=len(problem.kernels)).tolist(),
        },
        config.config_hash,
    )
    if do_plots:
        plots.plot_solution(sol, _path(outdir, "solution.png"), config.config_hash)
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _cmd_sweep(config, outdir, seed, threads, do_plots) -> int:
    center = config.diagnose_options.get("holder_center")
    if threads > 1:
        pool = ThreadPoolExecutor(max_workers=threads)
        map_fn = pool.map
    else:
        pool, map_fn = None, map
    try:
        rep = sigma_sweep(config.build_problem, list(config.sigma_list), config.scheme,
                          tol=config.solve_tol, max_iter=config.max_iterations,
                          holder_center=center, map_fn=map_fn)
    finally:
        if pool is not None:
            pool.shutdown()
    header = ["sigma", "solved", "residual_sup", "iterations", "sup_norm",
              "max_abs_mass_ratio", "pn_C_emp", "holder_alpha", "holder_residual",
              "holder_unresolved", "error"]
    rows = [
        (r.sigma, r.solved, r.residual_sup, r.iterations, r.sup_norm,
         r.max_abs_mass_ratio, r.pn_C_emp, r.holder_alpha, r.holder_residual,
         r.holder_unresolved, r.error)
        for r in rep.rows
    ]
    report.write_csv(_path(outdir, "sweep.csv"), header, rows, config.config_hash)
    report.write_json(
        _path(outdir, "sweep_report.json"),
        {"rows": [dict(zip(header, row)) for row in rows]},
        config.config_hash,
    )
    if do_plots:
        plots.plot_sweep(rep.rows, _path(outdir, "sweep.png"), config.config_hash)
    return 0 if all(r.solved for r in rep.rows) else 3


# ---------------------------------------------------------------------------
# symbol
# ---------------------------------------------------------------------------

def _cmd_symbol(config, outdir, seed, threads, do_plots) -> int:
    kernels = config.build_kernels(config.sigma)
    opts = config.symbol_options
    mags = np.geomspace(float(opts.get("xi_min", 0.25)), float(opts.get("xi_max", 64.0)),
                        int(opts.get("count", 16)))
    if config.dimension == 1:
        dirs = np.array([[1.0]])
    else:
        count = int(opts.get("directions", 4))
        ang = np.arange(count) * (np.pi / count)
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    rows = []
    fits = []
    curves_for_plot = []
    for ik, kernel in enumerate(kernels):
        fit = comparability_fit(kernel, mags, dirs, config.scheme)
        fits.append({
            "kernel_index": ik,
            "c_low": fit.c_low,
            "C_high": fit.C_high,
            "exponent_fit": fit.exponent_fit,
            "fit_residual": fit.fit_residual,
        })
        for idir, curve in enumerate(fit.curves):
            curves_for_plot.append((f"k{ik} dir{idir}", curve))
            for xi, s in zip(curve.xi_samples, curve.s_values):
                mag = float(np.linalg.norm(xi))
                rows.append((ik, idir) + tuple(np.asarray(xi) / mag) +
                            (mag, s, s / mag**config.sigma))
    coord_names = ["dir_x", "dir_y"][: config.dimension]
    report.write_csv(
        _path(outdir, "symbol.csv"),
        ["kernel_index", "direction_index"] + coord_names + ["xi_mag", "s", "s_over_xi_sigma"],
        rows,
        config.config_hash,
    )
    report.write_json(_path(outdir, "symbol_report.json"),
                      {"sigma": config.sigma, "fits": fits}, config.config_hash)
    if do_plots:
        plots.plot_symbol_curves(curves_for_plot, config.sigma, _path(outdir, "symbol.png"),
                                 config.config_hash)
    return 0


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------

def _cmd_diagnose(config, outdir, seed, threads, do_plots) -> int:
    opts = config.diagnose_options
    problem = config.build_problem(config.sigma)
    if opts.get("input_field"):
        u = import_field(opts["input_field"])
        source = opts["input_field"]
    else:
        u = solve_dirichlet(problem, config.scheme, tol=config.solve_tol,
                            max_iter=config.max_iterations).field
        source = "solved in-run"
    bounds = EllipticityBounds(problem.family_lam, problem.family_Lam)
    center = opts.get("holder_center") or [0.0] * config.dimension
    radii = opts.get("holder_radii") or [0.25, 0.125, 0.0625, 0.03125]
    rep = diagnose_field(u, config.sigma, bounds, config.scheme, holder_radii=radii,
                         holder_center=np.asarray(center, dtype=float))
    hold = rep.holder
    coord_names = ["x", "y"][: config.dimension]
    report.write_csv(
        _path(outdir, "diagnose_points.csv"),
        coord_names + ["absolute_mass", "P", "N", "w_full"],
        [tuple(p) + (a, pp, nn, wf)
         for p, a, pp, nn, wf in zip(rep.points, rep.absolute_mass, rep.P, rep.N,
                                     rep.w_full)],
        config.config_hash,
    )
    report.write_csv(
        _path(outdir, "holder.csv"),
        ["radius", "oscillation"],
        list(zip(hold.radii, hold.oscillations)),
        config.config_hash,
    )
    report.write_csv(
        _path(outdir, "p_decay.csv"),
        ["ball_radius", "sup_P"],
        list(zip(rep.p_decay.radii, rep.p_decay.sup_P)),
        config.config_hash,
    )
    report.write_json(
        _path(outdir, "diagnose_report.json"),
        {
            "source": source,
            "sigma": config.sigma,
            "sup_norm": u.sup_norm,
            "max_abs_mass_ratio": rep.max_abs_mass / u.sup_norm,
            "identity_max_gap": rep.identity_max_gap,
            "pn": {"C_emp": rep.pn.C_emp,
                   "cap": rep.pn.cap if np.isfinite(rep.pn.cap) else None,
                   "violations": [list(v) for v in rep.pn.violations]},
            "holder": {
                "alpha": hold.alpha, "C": hold.C, "residual": hold.residual,
                "unresolved": hold.unresolved, "error_scale": hold.error_scale,
                "center": list(np.asarray(center, dtype=float)),
            },
            "p_decay": {"radii": list(rep.p_decay.radii),
                        "sup_P": list(rep.p_decay.sup_P),
                        "rate": rep.p_decay.rate},
        },
        config.config_hash,
    )
    if do_plots:
        plots.plot_diagnostics(rep.points, rep.absolute_mass, rep.P, rep.N, hold,
                               _path(outdir, "diagnose.png"), config.config_hash)
    return 0


# ---------------------------------------------------------------------------
# check: the self-contained property battery
# ---------------------------------------------------------------------------

def _random_l0_kernel(rng, sigma, dimension, lam=1.0, Lam=2.0):
    c = 0.5 * (lam + Lam)
    a1, a2 = rng.uniform(0.1, 0.45, 2)
    w1, w2 = rng.uniform(0.5, 4.0, 2)
    p1, p2 = rng.uniform(0.0, 2 * np.pi, 2)

    def amp(r):
        r = np.asarray(r, dtype=float)
        raw = c + a1 * np.cos(w1 * np.log(r) + p1) + a2 * np.sin(w2 * np.log(r) + p2)
        return np.clip(raw, lam, Lam)

    return make_radial_kernel(sigma, dimension, amp, EllipticityBounds(lam, Lam))


def _random_field(rng, h, R, scale=1.0):
    m = int(round(2 * R / h)) + 1
    return ScalarField(1, h, R, scale * rng.uniform(-1.0, 1.0, m),
                       make_closure({"kind": "constant", "params": {"value": 0.0}}))


def _cmd_check(config, outdir, seed, threads, do_plots) -> int:
    rng = np.random.default_rng(seed)
    rows = []

    def record(name, ok, detail):
        rows.append((name, "pass" if ok else "fail", detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    sigma, h = config.sigma, config.h
    scheme = config.scheme
    problem = config.build_problem(sigma)
    bounds = EllipticityBounds(problem.family_lam, problem.family_Lam)

    # kernel classes and transforms
    power = make_power_kernel(sigma, 1)
    rep = classify_kernel(power, 400)
    nested = rep.is_L2 <= rep.is_L1 <= rep.is_L0
    record("power_kernel_class_L2", rep.is_L2 and nested,
           f"witnessed constants {tuple(round(c, 4) for c in rep.witnessed_constants)}")

    reg = regularize_kernel(problem.kernels[1], 0.25, problem.family_lam)
    pts = rng.uniform(0.3, 3.0, 64)[:, None] * np.sign(rng.uniform(-1, 1, 64))[:, None]
    outside = np.abs(pts[:, 0]) >= 0.25
    same = np.array_equal(reg(pts[outside]), problem.kernels[1](pts[outside]))
    record("regularize_identity_outside", same, "pointwise equal outside the blend ball")

    odd = make_radial_kernel(sigma, 1, lambda r: np.full_like(np.asarray(r, float), 1.0),
                             EllipticityBounds(1.0, 1.0))

    def odd_density(p):
        p = np.atleast_2d(p)
        return odd.density(p) * (1.0 + 0.3 * np.sign(p[:, 0]))

    from dataclasses import replace as _replace
    odd_kernel = _replace(odd, density=odd_density, descriptor=None)
    sym1 = symmetrize(odd_kernel)
    sym2 = symmetrize(sym1)
    probe = rng.uniform(0.2, 2.0, 32)[:, None]
    ok_sym = (np.allclose(sym1(probe), odd(probe), rtol=1e-13) and
              np.array_equal(sym1(probe), sym2(probe)))
    record("symmetrize_idempotent_even_part", ok_sym, "odd part removed; idempotent")

    # Pucci sandwich, exact
    plan = field_plan(sigma, scheme, h, 1)
    worst = 0.0
    ok_sand = True
    for _ in range(3):
        u = _random_field(rng, h, 2.0)
        for _ in range(6):
            K = _random_l0_kernel(rng, sigma, 1)
            for x in rng.uniform(-0.8, 0.8, 5):
                L = evaluate_linear(K, u, [x], scheme, plan=plan, with_errors=False).value
                Mp = evaluate_pucci(u, [x], bounds, sigma, "+", scheme, plan=plan,
                                    with_errors=False).value
                Mm = evaluate_pucci(u, [x], bounds, sigma, "-", scheme, plan=plan,
                                    with_errors=False).value
                ok_sand &= (Mm <= L <= Mp)
                worst = max(worst, Mm - L, L - Mp)
    record("pucci_sandwich_exact", ok_sand, f"worst violation {worst:.3e} (must be <= 0)")

    # Bellman concavity
    ok_conc = True
    margin = np.inf
    st = discretize(problem, scheme)
    for _ in range(2):
        u = _random_field(rng, h, 2.0)
        v = _random_field(rng, h, 2.0)
        w = average(u, v)
        per_u = st.apply_per_kernel(u)
        per_v = st.apply_per_kernel(v)
        per_w = st.apply_per_kernel(w)
        lhs = per_w.min(axis=0)
        rhs = (per_u.min(axis=0) + per_v.min(axis=0)) / 2.0
        structural = (np.minimum.reduce((per_u + per_v) / 2.0, axis=0) >= rhs - 0.0).all()
        ulp = 1e-12 * max(1.0, u.sup_norm + v.sup_norm) * np.max(np.abs(st.A[0]).sum(axis=1))
        ok_conc &= structural and bool(np.all(lhs >= rhs - ulp))
        margin = min(margin, float(np.min(lhs - rhs)))
    record("bellman_concavity", ok_conc, f"min margin {margin:.3e} (>= -eps allowance)")

    # monotone weights
    min_off = np.inf
    for A in st.A:
        off = A.copy()
        np.fill_diagonal(off, 0.0)
        min_off = min(min_off, float(off.min()))
    record("monotone_offdiagonal_weights", min_off >= 0.0, f"min off-diagonal {min_off:.3e}")

    # solve, residual replay, comparison
    sol = solve_dirichlet(problem, scheme, tol=config.solve_tol,
                          max_iter=config.max_iterations, stencils=st)
    from .solver import BellmanProblem, residual as residual_field
    res = residual_field(problem, sol.field, scheme, stencils=st)
    replay = float(np.max(np.abs(res.values)))
    shifted = BellmanProblem(kernels=problem.kernels, exterior=problem.exterior.shifted(0.1),
                             h=h, offsets=problem.offsets, box_radius=problem.box_radius)
    sol2 = solve_dirichlet(shifted, scheme, tol=config.solve_tol)
    comparison = bool(np.all(sol2.field.values - sol.field.values >= -2 * config.solve_tol))
    record("solve_residual_and_comparison",
           sol.residual_sup <= config.solve_tol and replay <= config.solve_tol and comparison,
           f"residual {sol.residual_sup:.2e}, replay {replay:.2e}, comparison holds: {comparison}")

    # P/N identities on the solved field
    hplan = half_ball_plan(sigma, scheme, h, 1)
    u = sol.field
    ok_pn = True
    worst_gap = 0.0
    P0, N0 = compute_P_N(u, np.zeros(1), scheme, sigma, plan=hplan)
    ok_pn &= (P0 == 0.0 and N0 == 0.0)
    for x in rng.uniform(-0.45, 0.45, 6):
        x = np.array([x])
        P, N = compute_P_N(u, x, scheme, sigma, plan=hplan)
        wf = compute_w_A(u, x, np.ones(hplan.size), scheme, sigma, plan=hplan)
        worst_gap = max(worst_gap, abs(P - N - wf))
        for _ in range(30):
            mask = (rng.random(hplan.size) < 0.5).astype(float)
            ok_pn &= compute_w_A(u, x, mask, scheme, sigma, plan=hplan) <= P
    ok_pn &= worst_gap <= 1e-10 * max(1.0, u.sup_norm)
    record("pn_identities_and_masks", ok_pn,
           f"P(0)=N(0)=0; max |P-N-w_full| = {worst_gap:.3e}; masks never exceed P")

    # symbol checks
    s0 = symbol(problem.kernels[1], np.zeros(1))
    s16 = symbol(power, [16.0])
    s32 = symbol(power, [32.0])
    hom = abs(s32 / s16 - 2.0**sigma) / 2.0**sigma
    mirror = abs(symbol(problem.kernels[1], [3.0]) - symbol(problem.kernels[1], [-3.0]))
    ok_symbol = (s0 == 0.0) and hom < 1e-12 and mirror < 1e-12 * max(1.0, s16)
    record("symbol_zero_homogeneity_mirror", ok_symbol,
           f"s(0)={s0}, homogeneity rel err {hom:.2e}, mirror gap {mirror:.2e}")

    # field round trip
    path = _path(outdir, "roundtrip.field")
    export_field(u, path)
    u2 = import_field(path)
    ok_rt = (np.array_equal(u.values, u2.values) and u2.sup_norm == u.sup_norm
             and u2.exterior.descriptor() == u.exterior.descriptor())
    record("field_roundtrip_exact", ok_rt, "values, sup_norm, and closure descriptor identical")

    report.write_csv(_path(outdir, "check.csv"), ["check", "status", "detail"],
                     rows, config.config_hash)
    report.write_json(
        _path(outdir, "check_report.json"),
        {"results": [{"check": n, "status": s, "detail": d} for n, s, d in rows],
         "all_passed": all(s == "pass" for _, s, _ in rows)},
        config.config_hash,
    )
    if do_plots:
        plots.plot_check(rows, _path(outdir, "check.png"), config.config_hash)
    return 0 if all(s == "pass" for _, s, _ in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
