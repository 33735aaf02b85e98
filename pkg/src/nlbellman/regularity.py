"""Diagnostics measuring the bounded quantities behind the regularity theory.

On a solved Bellman field these routines measure, at desk scale, exactly the
objects the theory controls: the absolutely convergent mass int |delta u| K,
the masked localized differences w_A over the half ball with their extremal
envelopes P and N, the near-linear comparability of P and N, the Holder
exponent of the fractional Laplacian, and the concavity inequalities that an
infimum of linear operators must satisfy.  Everything here measures; nothing
here proves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .fields import ScalarField, average, translated_closure
from .kernels import EllipticityBounds, smoothstep
from .operators import _check_point, _deltas, _evaluate
from .quadrature import QuadratureScheme, SamplePlan, field_plan
from .solver import BellmanProblem, StencilSet, discretize


def localization_bump(points) -> np.ndarray:
    """The fixed localization bump b: 1 on B_{1/4}, 0 outside B_{1/2}."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return smoothstep(2.0 * np.sqrt(np.sum(pts * pts, axis=1)))


def half_ball_plan(sigma: float, scheme: QuadratureScheme, h: float, dimension: int) -> SamplePlan:
    """Quadrature plan for power-kernel integrals restricted to B_{1/2}."""
    return field_plan(sigma, scheme, h, dimension, cap_radius=0.5)


@dataclass(frozen=True, eq=False)
class MaskedKernel:
    """Power kernel times a set indicator over half-ball quadrature nodes."""

    sigma: float
    plan: SamplePlan
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=float)
        if mask.shape != (self.plan.size,):
            raise ValidationError("mask length must match the plan's node count")
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ValidationError("mask values must be 0 or 1")
        if self.plan.far_radius is not None or self.plan.ring_end > 0.5 + 1e-12:
            raise ValidationError("masked kernels live on a plan capped at B_{1/2}")
        object.__setattr__(self, "mask", mask)


def _check_half_ball_point(u: ScalarField, x) -> np.ndarray:
    x = _check_point(u, x)
    if np.linalg.norm(x) > 0.5 + 1e-12:
        raise ValidationError(f"diagnostic point {x} must lie in the closed half ball")
    return x


def absolute_mass(u: ScalarField, x, sigma: float, scheme: QuadratureScheme,
                  plan: SamplePlan | None = None) -> float:
    """int |delta u(x, y)| (2-sigma)/|y|^{n+sigma} dy over all of R^n.

    Same core/ring/tail split as the linear operators, with the core using
    the moment of |y' D^2u y| along the core directions.
    """
    x = _check_half_ball_point(u, x)
    from .operators import _power_kernel

    kernel = _power_kernel(sigma, u.dimension)
    return _evaluate(u, x, scheme, "abs", kernel=kernel, plan=plan, with_errors=False).value


def _centered_deltas(u: ScalarField, x: np.ndarray, plan: SamplePlan) -> np.ndarray:
    """delta u(x, y) - delta u(0, y) on the plan nodes (exactly zero at x=0)."""
    origin = np.zeros(u.dimension)
    return _deltas(u, x, plan) - _deltas(u, origin, plan)


def compute_w_A(u: ScalarField, x, mask, scheme: QuadratureScheme, sigma: float | None = None,
                plan: SamplePlan | None = None) -> float:
    """b(x) * int_{B_1/2} (delta u(x,y) - delta u(0,y)) K_A(y) dy.

    ``mask`` is a 0/1 array over the half-ball plan nodes (or a MaskedKernel);
    masked sums and the P/N envelopes share nodes and weights, so the
    envelope inequalities hold exactly at node level.
    """
    if isinstance(mask, MaskedKernel):
        plan, sigma, mask = mask.plan, mask.sigma, mask.mask
    if sigma is None:
        raise ValidationError("sigma is required when the mask is a bare array")
    if plan is None:
        plan = half_ball_plan(sigma, scheme, u.h, u.dimension)
    mask = np.asarray(mask, dtype=float)
    x = _check_half_ball_point(u, x)
    diff = _centered_deltas(u, x, plan)
    b = float(localization_bump(x[None, :])[0])
    return float(b * np.sum(plan.weights * (mask * diff)))


def compute_P_N(u: ScalarField, x, scheme: QuadratureScheme, sigma: float,
                plan: SamplePlan | None = None) -> tuple:
    """Envelopes P(x) = sup_A w_A(x) and N(x) = sup_A (-w_A(x)).

    Realized by the sign masks {delta u(x,y) > delta u(0,y)} and its
    complement: P sums the positive part, N the negative part.
    """
    if plan is None:
        plan = half_ball_plan(sigma, scheme, u.h, u.dimension)
    x = _check_half_ball_point(u, x)
    diff = _centered_deltas(u, x, plan)
    b = float(localization_bump(x[None, :])[0])
    P = float(b * np.sum(plan.weights * np.maximum(diff, 0.0)))
    N = float(b * np.sum(plan.weights * np.maximum(-diff, 0.0)))
    return P, N


@dataclass(frozen=True)
class PNReport:
    """Empirical constant in the two-sided P/N comparability inequality."""

    points: tuple
    P: tuple
    N: tuple
    C_emp: float
    cap: float
    violations: tuple

    @property
    def within_cap(self) -> bool:
        return len(self.violations) == 0


def pn_comparability(u: ScalarField, points, bounds: EllipticityBounds, sigma: float,
                     scheme: QuadratureScheme, cap: float = np.inf) -> PNReport:
    """Smallest C with (lam/Lam) N - C|x| <= P <= (Lam/lam) N + C|x| at samples."""
    plan = half_ball_plan(sigma, scheme, u.h, u.dimension)
    ratio = bounds.Lam / bounds.lam
    pts, Ps, Ns, needed = [], [], [], []
    for x in points:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        P, N = compute_P_N(u, x, scheme, sigma, plan=plan)
        pts.append(tuple(x))
        Ps.append(P)
        Ns.append(N)
        r = float(np.linalg.norm(x))
        if r > 0:
            needed.append(max((P - ratio * N) / r, (N / ratio - P) / r, 0.0))
        else:
            needed.append(0.0)
    C_emp = float(max(needed)) if needed else 0.0
    violations = tuple(p for p, c in zip(pts, needed) if c > cap)
    return PNReport(points=tuple(pts), P=tuple(Ps), N=tuple(Ns), C_emp=C_emp,
                    cap=cap, violations=violations)


@dataclass(frozen=True)
class HolderFit:
    """Log-log fit of the oscillation of the fractional Laplacian.

    ``alpha`` is None when every measured oscillation sits below ten times
    the quadrature error scale ("unresolved"): no exponent is fabricated.
    """

    alpha: float | None
    C: float | None
    residual: float | None
    radii: tuple
    oscillations: tuple
    error_scale: float

    @property
    def unresolved(self) -> bool:
        return self.alpha is None


def _sphere_points(center: np.ndarray, radius: float, dimension: int, count: int = 16):
    if dimension == 1:
        return center[None, :] + np.array([[radius], [-radius]])
    ang = (np.arange(count) + 0.5) * (2.0 * np.pi / count)
    return center[None, :] + radius * np.column_stack([np.cos(ang), np.sin(ang)])


def holder_fit(u: ScalarField, center, sigma: float, radii, scheme: QuadratureScheme) -> HolderFit:
    """Fit sup_{|x-c|=r} |v(x) - v(c)| ~ C r^alpha for v the fractional Laplacian.

    Radii must give at least 4 dyadic levels inside B_{1/4} around the center.
    The resolvability scale is measured, not assumed: every value is
    recomputed on two staggered node layouts, and the worst disagreement is
    the quadrature reproducibility of v on this field.  Oscillations below
    ten times that scale are declared unresolved rather than fitted.
    """
    import dataclasses

    from .operators import _power_kernel, _reduce
    from .quadrature import amplitudes

    radii = sorted(float(r) for r in radii)
    if len(radii) < 4:
        raise ValidationError("need at least 4 radii")
    if radii[-1] > 0.25 + 1e-12:
        raise ValidationError("radii must stay within B_{1/4} of the center")
    center = np.atleast_1d(np.asarray(center, dtype=float))

    kernel = _power_kernel(sigma, u.dimension)
    npd = scheme.nodes_per_decade
    variants = [scheme]
    for factor in (1.21, 1.46):
        variants.append(dataclasses.replace(scheme, nodes_per_decade=int(npd * factor) + 1))
    plans = [field_plan(sigma, v, u.h, u.dimension) for v in variants]
    amps = [amplitudes(kernel, p) for p in plans]

    def evaluate_all(x):
        x = _check_point(u, x)
        return [_reduce(p, a, _deltas(u, x, p), "linear", None) for p, a in zip(plans, amps)]

    vc = evaluate_all(center)
    spread = 0.0
    oscs = []
    for r in radii:
        osc = 0.0
        for p in _sphere_points(center, r, u.dimension):
            vals = evaluate_all(p)
            # each node layout measures v(p) - v(c) with itself; disagreement
            # between layouts is the genuine resolvability limit of that
            # difference (systematic per-layout bias cancels)
            diffs = [v - c for v, c in zip(vals, vc)]
            spread = max(spread, max(abs(d - diffs[0]) for d in diffs[1:]))
            osc = max(osc, abs(diffs[0]))
        oscs.append(osc)
    err_scale = spread + 1e-13 * max(1.0, abs(vc[0]))
    oscs_arr = np.asarray(oscs)
    if np.max(oscs_arr) < 10.0 * err_scale or np.any(oscs_arr <= 0.0):
        return HolderFit(None, None, None, tuple(radii), tuple(oscs), err_scale)
    A = np.column_stack([np.log(radii), np.ones(len(radii))])
    coef, *_ = np.linalg.lstsq(A, np.log(oscs_arr), rcond=None)
    resid = np.log(oscs_arr) - A @ coef
    return HolderFit(
        alpha=float(coef[0]),
        C=float(np.exp(coef[1])),
        residual=float(np.sqrt(np.mean(resid**2))),
        radii=tuple(radii),
        oscillations=tuple(oscs),
        error_scale=err_scale,
    )


@dataclass(frozen=True)
class ConcavityReport:
    """Margins of the discrete concavity inequalities on solved fields."""

    average_margin: float
    average_threshold: float
    mollified: dict
    average_ok: bool


def _discrete_mollifier(dimension: int, h: float, radius: float):
    """Normalized bump weights on grid offsets with |j h| < radius."""
    if radius < h:
        if dimension == 1:
            return np.array([0]), np.array([1.0])
        return np.zeros((1, 2), dtype=int), np.array([1.0])
    k = int(np.floor(radius / h))
    if dimension == 1:
        offs = np.arange(-k, k + 1)
        w = smoothstep(np.abs(offs) * h / radius)
        return offs, w / w.sum()
    g = np.arange(-k, k + 1)
    J, K = np.meshgrid(g, g, indexing="ij")
    offs = np.column_stack([J.ravel(), K.ravel()])
    w = smoothstep(np.sqrt(np.sum((offs * h) ** 2, axis=1)) / radius)
    keep = w > 0
    return offs[keep], w[keep] / w[keep].sum()


def _mollify(u: ScalarField, radius: float) -> ScalarField:
    """Discrete convolution with the bump, applied to grid and closure alike.

    The result is the exact convex combination of grid translates of u
    everywhere in R^n, which is what the subsolution argument needs.
    """
    from .closures import Closure

    offs, w = _discrete_mollifier(u.dimension, u.h, radius)
    offs = np.atleast_2d(np.asarray(offs, dtype=float).reshape(len(w), -1))
    pts = u.grid_points()
    vals = np.zeros(pts.shape[0])
    for o, wj in zip(offs, w):
        vals += wj * u.values_at(pts + o[None, :] * u.h)
    base = u.exterior

    def mixed(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        out = np.zeros(p.shape[0])
        for o, wj in zip(offs, w):
            out += wj * base.fn(p + o[None, :] * u.h)
        return out

    mixture = Closure(kind="mollified", params={}, fn=mixed, bound=base.bound,
                      lo=base.lo, hi=base.hi)
    return ScalarField(u.dimension, u.h, u.box_radius, vals.reshape(u.values.shape), mixture)


def _shift_modulus(st: StencilSet, u: ScalarField, radius: float, region: np.ndarray) -> float:
    """max over grid shifts |s| <= radius of sup |I_h u(.-s) - I_h u| on the region."""
    base = st.apply_per_kernel(u).min(axis=0)
    k = max(1, int(np.floor(radius / u.h)))
    worst = 0.0
    n = u.dimension
    shifts = ([(j,) for j in range(-k, k + 1) if j != 0] if n == 1 else
              [(j, l) for j in range(-k, k + 1) for l in range(-k, k + 1)
               if (j, l) != (0, 0) and np.hypot(j, l) <= k])
    for s in shifts:
        sv = np.asarray(s, dtype=float) * u.h
        shifted_vals = u.values_at(u.grid_points() - sv[None, :]).reshape(u.values.shape)
        shifted = ScalarField(n, u.h, u.box_radius, shifted_vals,
                              translated_closure(u.exterior, sv))
        res = st.apply_per_kernel(shifted).min(axis=0)
        worst = max(worst, float(np.max(np.abs((res - base)[region]))))
    return worst


def concavity_checks(problem: BellmanProblem, u: ScalarField, v: ScalarField,
                     scheme: QuadratureScheme, tol: float = 1e-8,
                     mollifier_radii=None, stencils: StencilSet | None = None) -> ConcavityReport:
    """Exact discrete forms of the two concavity statements.

    (a) the average of two solutions is a subsolution: I_h((u+v)/2) >= -2 tol
        at every interior node (plus a machine-epsilon allowance);
    (b) mollification: I_h(eta * u) >= -tol - modulus(delta_m) on the nodes a
        distance delta_m inside the unit ball, where the modulus is measured
        directly from grid translates of u.
    """
    st = stencils if stencils is not None else discretize(problem, scheme)
    ulp = 1e-12 * max(1.0, u.sup_norm + v.sup_norm)

    avg = average(u, v)
    res_avg = st.apply_per_kernel(avg).min(axis=0)
    avg_threshold = -2.0 * tol - ulp
    avg_margin = float(np.min(res_avg))

    r_int = np.sqrt(np.sum(st.interior_points**2, axis=1))
    mollified = {}
    for dm in (mollifier_radii if mollifier_radii is not None else
               (u.h, 2 * u.h, 4 * u.h)):
        mu = _mollify(u, dm)
        region = r_int < 1.0 - dm - 1e-12
        res = st.apply_per_kernel(mu).min(axis=0)
        margin = float(np.min(res[region])) if np.any(region) else 0.0
        modulus = _shift_modulus(st, u, dm, region) if dm >= u.h else 0.0
        threshold = -tol - modulus - ulp
        mollified[float(dm)] = {
            "margin": margin,
            "modulus": modulus,
            "threshold": threshold,
            "ok": bool(margin >= threshold),
        }

    return ConcavityReport(
        average_margin=avg_margin,
        average_threshold=avg_threshold,
        mollified=mollified,
        average_ok=bool(avg_margin >= avg_threshold),
    )


@dataclass(frozen=True)
class PDecayProfile:
    """sup of P over shrinking dyadic balls, with the fitted decay rate.

    The geometric-ball decay of P is the measurable shadow of the oscillation
    improvement driving the Holder estimate; only the measured suprema and
    the fitted rate are reported, no proof constants are assumed.
    """

    radii: tuple
    sup_P: tuple
    rate: float | None  # slope of log sup_P against log radius, if fittable


def p_decay_profile(u: ScalarField, sigma: float, scheme: QuadratureScheme,
                    ratio: float = 0.5, levels: int = 5) -> PDecayProfile:
    """Measure sup_{B_{ratio^k}} P for k = 0..levels-1 and fit the decay."""
    if not (0.0 < ratio < 1.0):
        raise ValidationError("ball ratio must lie in (0, 1)")
    plan = half_ball_plan(sigma, scheme, u.h, u.dimension)
    pts = u.grid_points()
    radii = [ratio**k * 0.5 for k in range(levels)]
    sups = []
    for r in radii:
        idx = u.interior_node_indices(r + 1e-12)
        vals = [compute_P_N(u, pts[i], scheme, sigma, plan=plan)[0] for i in idx]
        sups.append(max(vals) if vals else 0.0)
    positive = [s > 0 for s in sups]
    rate = None
    if all(positive):
        coef = np.polyfit(np.log(radii), np.log(sups), 1)
        rate = float(coef[0])
    return PDecayProfile(radii=tuple(radii), sup_P=tuple(sups), rate=rate)


@dataclass(frozen=True, eq=False)
class RegularityReport:
    """Per-point diagnostics of a solved field plus the fitted summaries."""

    sigma: float
    points: np.ndarray = field(repr=False)
    absolute_mass: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    N: np.ndarray = field(repr=False)
    w_full: np.ndarray = field(repr=False)
    pn: PNReport
    holder: HolderFit
    p_decay: PDecayProfile

    def __post_init__(self):
        if np.any(self.absolute_mass < 0) or np.any(self.P < 0) or np.any(self.N < 0):
            raise ValidationError("absolute mass and P/N envelopes must be nonnegative")

    @property
    def max_abs_mass(self) -> float:
        return float(np.max(self.absolute_mass)) if len(self.absolute_mass) else 0.0

    @property
    def identity_max_gap(self) -> float:
        return float(np.max(np.abs(self.P - self.N - self.w_full)))


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    solved: bool
    residual_sup: float | None = None
    iterations: int | None = None
    sup_norm: float | None = None
    max_abs_mass_ratio: float | None = None
    pn_C_emp: float | None = None
    holder_alpha: float | None = None
    holder_residual: float | None = None
    holder_unresolved: bool | None = None
    error: str | None = None


@dataclass(frozen=True)
class SweepReport:
    rows: tuple
    sigma_list: tuple


def diagnose_field(u: ScalarField, sigma: float, bounds: EllipticityBounds,
                   scheme: QuadratureScheme, holder_radii=(0.25, 0.125, 0.0625, 0.03125),
                   holder_center=None) -> RegularityReport:
    """Full per-point diagnostic battery over the half-ball grid nodes."""
    pts_all = u.grid_points()
    idx = u.interior_node_indices(0.5)
    points = pts_all[idx]
    plan_full = field_plan(sigma, scheme, u.h, u.dimension)
    plan_half = half_ball_plan(sigma, scheme, u.h, u.dimension)
    full_mask = np.ones(plan_half.size)
    A_vals, P_vals, N_vals, w_full = [], [], [], []
    for x in points:
        A_vals.append(absolute_mass(u, x, sigma, scheme, plan=plan_full))
        P, N = compute_P_N(u, x, scheme, sigma, plan=plan_half)
        P_vals.append(P)
        N_vals.append(N)
        w_full.append(compute_w_A(u, x, full_mask, scheme, sigma, plan=plan_half))
    pn = pn_comparability(u, points, bounds, sigma, scheme)
    center = holder_center if holder_center is not None else np.zeros(u.dimension)
    hold = holder_fit(u, center, sigma, holder_radii, scheme)
    decay = p_decay_profile(u, sigma, scheme)
    return RegularityReport(
        sigma=sigma,
        points=points,
        absolute_mass=np.asarray(A_vals),
        P=np.asarray(P_vals),
        N=np.asarray(N_vals),
        w_full=np.asarray(w_full),
        pn=pn,
        holder=hold,
        p_decay=decay,
    )


def sigma_sweep(problem_factory, sigma_list, scheme: QuadratureScheme, tol: float = 1e-8,
                max_iter: int = 50, holder_center=None, map_fn=map) -> SweepReport:
    """Solve and diagnose across orders; per-sigma failures are recorded, not raised.

    ``problem_factory(sigma)`` must return the BellmanProblem for that order.
    ``map_fn`` lets a caller run the (independent) orders on a thread pool;
    results come back in order either way.
    """
    from .solver import solve_dirichlet

    sigma_list = [float(s) for s in sigma_list]
    if any(not (1.05 <= s <= 1.995) for s in sigma_list):
        raise ValidationError("sweep orders must lie in [1.05, 1.995]")

    def run_one(s: float) -> SweepRow:
        try:
            problem = problem_factory(s)
            sol = solve_dirichlet(problem, scheme, tol=tol, max_iter=max_iter)
            u = sol.field
            rep = diagnose_field(
                u, s, EllipticityBounds(problem.family_lam, problem.family_Lam), scheme,
                holder_center=holder_center)
            return SweepRow(
                sigma=s,
                solved=True,
                residual_sup=sol.residual_sup,
                iterations=sol.iterations,
                sup_norm=u.sup_norm,
                max_abs_mass_ratio=rep.max_abs_mass / u.sup_norm,
                pn_C_emp=rep.pn.C_emp,
                holder_alpha=rep.holder.alpha,
                holder_residual=rep.holder.residual,
                holder_unresolved=rep.holder.unresolved,
            )
        except Exception as exc:  # a failed order must not kill the sweep
            return SweepRow(sigma=s, solved=False, error=f"{type(exc).__name__}: {exc}")

    rows = list(map_fn(run_one, sigma_list))
    return SweepReport(rows=tuple(rows), sigma_list=tuple(sigma_list))
