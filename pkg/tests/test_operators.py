import numpy as np
import pytest

from nlbellman import (EllipticityBounds, QuadratureScheme, ValidationError, closures,
                       evaluate_bellman, evaluate_linear, evaluate_pucci,
                       fractional_laplacian, kernels)
from nlbellman.fields import from_closure, from_function
from nlbellman.quadrature import field_plan
from nlbellman.solver import BellmanProblem

from conftest import (FLAP_BUMPQUAD_SIGMA15, FLAP_BUMPQUAD_SIGMA1999,
                      S1_POWER_1D_SIGMA15, random_bounded_field, random_l0_kernel)

H = 1.0 / 64.0


def bump_quadratic_field(h=H, dimension=1):
    qb = closures.make_closure({"kind": "quadratic_bump", "params": {"width": 1.0}})
    return from_function(qb.fn, dimension, h, 2.0, closures.constant(0.0))


def test_constant_field_gives_zero_with_zero_errors():
    u = from_closure(closures.constant(0.7), 1, H, 2.0)
    K = kernels.make_power_kernel(1.5, 1)
    res = evaluate_linear(K, u, [0.0], QuadratureScheme())
    # delta u vanishes identically; only sub-ulp interpolation roundoff remains
    assert abs(res.value) <= 1e-12
    assert res.inner_error <= 1e-12
    assert res.tail_error == 0.0


def test_cosine_field_matches_pinned_symbol_constant():
    u = from_closure(closures.cosine(1.0, [1.0]), 1, H, 2.0)
    K = kernels.make_power_kernel(1.5, 1)
    q = QuadratureScheme(outer_radius=64.0, nodes_per_decade=128)
    res = evaluate_linear(K, u, [0.0], q)
    # L cos(x) = -s(1) cos(x); grid interpolation limits accuracy to ~0.5%
    assert res.value == pytest.approx(-S1_POWER_1D_SIGMA15, rel=1e-2)
    assert abs(res.value + S1_POWER_1D_SIGMA15) <= res.total_error + 0.005 * S1_POWER_1D_SIGMA15
    # same oracle through the fractional laplacian at another point
    x = np.array([0.25])
    v = fractional_laplacian(u, x, 1.5, q)
    assert v == pytest.approx(-S1_POWER_1D_SIGMA15 * np.cos(0.25), rel=1e-2)


def test_sigma_to_two_limit_on_bump_quadratic():
    u = bump_quadratic_field()
    v = fractional_laplacian(u, [0.0], 1.999, QuadratureScheme())
    assert v == pytest.approx(FLAP_BUMPQUAD_SIGMA1999, rel=5e-3)
    assert v == pytest.approx(4.0, rel=0.02)  # 2 u''(0) with u''(0) = 2
    v15 = fractional_laplacian(u, [0.0], 1.5, QuadratureScheme())
    assert v15 == pytest.approx(FLAP_BUMPQUAD_SIGMA15, rel=0.02)


def test_pucci_constant_zero_and_positive_delta_case():
    q = QuadratureScheme()
    bounds = EllipticityBounds(1.0, 2.0)
    const = from_closure(closures.constant(0.3), 1, H, 2.0)
    for sign in "+-":
        assert abs(evaluate_pucci(const, [0.0], bounds, 1.5, sign, q).value) <= 1e-12
    # convex-type bump at its minimum: delta u >= 0 at every node
    u = from_function(lambda p: p[:, 0] ** 2, 1, H, 2.0, closures.constant(4.0))
    plan = field_plan(1.5, q, H, 1)
    mp = evaluate_pucci(u, [0.0], bounds, 1.5, "+", q, plan=plan).value
    mm = evaluate_pucci(u, [0.0], bounds, 1.5, "-", q, plan=plan).value
    iso = evaluate_linear(kernels.make_power_kernel(1.5, 1), u, [0.0], q, plan=plan).value
    assert mm == pytest.approx(1.0 * iso, rel=1e-12)
    assert mp == pytest.approx(2.0 * iso, rel=1e-12)
    assert mp == pytest.approx((bounds.Lam / bounds.lam) * mm, rel=1e-12)


def test_pucci_sandwich_exact_on_random_data():
    rng = np.random.default_rng(42)
    q = QuadratureScheme()
    bounds = EllipticityBounds(1.0, 2.0)
    plan = field_plan(1.5, q, H, 1)
    for _ in range(3):
        u = random_bounded_field(rng)
        for _ in range(5):
            K = random_l0_kernel(rng)
            for x in rng.uniform(-0.8, 0.8, 4):
                L = evaluate_linear(K, u, [x], q, plan=plan, with_errors=False).value
                mp = evaluate_pucci(u, [x], bounds, 1.5, "+", q, plan=plan, with_errors=False).value
                mm = evaluate_pucci(u, [x], bounds, 1.5, "-", q, plan=plan, with_errors=False).value
                assert mm <= L <= mp  # exact, no tolerance


def test_monotone_comparison_exact():
    rng = np.random.default_rng(7)
    q = QuadratureScheme()
    u = random_bounded_field(rng)
    # v >= u with equality at the evaluation point (bump vanishing at x=0)
    bump = np.maximum(0.0, np.abs(u.axis_coords())) * 0.3
    v = u.with_values(u.values + bump)
    K = random_l0_kernel(rng)
    Lu = evaluate_linear(K, u, [0.0], q, with_errors=False).value
    Lv = evaluate_linear(K, v, [0.0], q, with_errors=False).value
    assert Lu <= Lv


def test_linearity_in_field_values():
    rng = np.random.default_rng(9)
    q = QuadratureScheme()
    u = random_bounded_field(rng)
    v = random_bounded_field(rng)
    K = random_l0_kernel(rng)
    x = [0.125]
    combo = u.with_values(2.0 * u.values + 0.5 * v.values)
    lhs = evaluate_linear(K, combo, x, q, with_errors=False).value
    rhs = 2.0 * evaluate_linear(K, u, x, q, with_errors=False).value \
        + 0.5 * evaluate_linear(K, v, x, q, with_errors=False).value
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_bellman_single_kernel_and_constructed_values():
    q = QuadratureScheme()
    u = bump_quadratic_field()
    K = kernels.make_power_kernel(1.5, 1)
    single = BellmanProblem(kernels=(K,), exterior=closures.constant(0.0), h=H,
                            offsets=(0.3,))
    res = evaluate_bellman(single, u, [0.0], q)
    lin = evaluate_linear(K, u, [0.0], q, with_errors=False).value
    assert res.value == pytest.approx(lin + 0.3, abs=1e-12)
    assert res.argmin_index == 0

    # two controls with offsets tuned so L_1 u = 0.4 and L_2 u = -0.2
    ell = lin
    family = BellmanProblem(
        kernels=(K, K), exterior=closures.constant(0.0), h=H,
        offsets=(0.4 - ell, -0.2 - ell),
    )
    res2 = evaluate_bellman(family, u, [0.0], q)
    assert res2.per_control_values[0] == pytest.approx(0.4, abs=1e-12)
    assert res2.per_control_values[1] == pytest.approx(-0.2, abs=1e-12)
    assert res2.value == pytest.approx(-0.2, abs=1e-12)
    assert res2.argmin_index == 1  # the second control, least-index ties elsewhere


def test_bellman_tie_breaks_to_least_index():
    q = QuadratureScheme()
    u = bump_quadratic_field()
    K = kernels.make_power_kernel(1.5, 1)
    prob = BellmanProblem(kernels=(K, K), exterior=closures.constant(0.0), h=H,
                          offsets=(0.0, 1.0))
    assert evaluate_bellman(prob, u, [0.3], q).argmin_index == 0
    prob_tie = BellmanProblem(kernels=(K, K), exterior=closures.constant(0.0), h=H)
    assert evaluate_bellman(prob_tie, u, [0.3], q).argmin_index == 0


def test_bellman_inf_sup_asymmetry():
    rng = np.random.default_rng(13)
    q = QuadratureScheme()
    u = random_bounded_field(rng)
    neg = u.with_values(-u.values)
    prob = BellmanProblem(
        kernels=(kernels.scaled_power_kernel(1.5, 1, 1.0),
                 kernels.make_log_wobble_kernel(1.5, 1)),
        exterior=closures.constant(0.0), h=H,
    )
    for x in ([0.0], [0.25], [-0.5]):
        a = evaluate_bellman(prob, neg, x, q).value
        b = evaluate_bellman(prob, u, x, q).value
        assert a <= -b + 1e-11


def test_fractional_laplacian_scaling_identity():
    q = QuadratureScheme(outer_radius=16.0, nodes_per_decade=64)
    sigma, r = 1.5, 0.5
    base = closures.make_closure({"kind": "gaussian", "params": {"amplitude": 1.0, "width": 0.6}})
    scaled = closures.make_closure({"kind": "gaussian", "params": {"amplitude": 1.0, "width": 0.6 / r}})
    u = from_closure(base, 1, H, 2.0)        # u(x)
    ur = from_closure(scaled, 1, H, 2.0)     # u_r(x) = u(r x)
    x = np.array([0.25])
    lhs = fractional_laplacian(ur, x, sigma, q)
    rhs = r**sigma * fractional_laplacian(u, r * x, sigma, q)
    assert lhs == pytest.approx(rhs, rel=5e-3)


def test_evaluation_point_guard():
    u = bump_quadratic_field()
    with pytest.raises(ValidationError):
        evaluate_linear(kernels.make_power_kernel(1.5, 1), u, [2.0 - H], QuadratureScheme())


def test_error_honesty_on_smooth_battery():
    coarse = QuadratureScheme()
    fine = QuadratureScheme(inner_radius=H / 2, nodes_per_decade=64)
    fieldset = [
        from_closure(closures.make_closure(
            {"kind": "gaussian", "params": {"amplitude": 1.0, "width": 0.7}}), 1, H, 2.0),
        from_closure(closures.cosine(0.8, [2.0]), 1, H, 2.0),
        bump_quadratic_field(),
    ]
    K = kernels.make_log_wobble_kernel(1.5, 1)
    for u in fieldset:
        for x in ([0.0], [0.3], [-0.6]):
            a = evaluate_linear(K, u, x, coarse)
            b = evaluate_linear(K, u, x, fine)
            assert abs(a.value - b.value) <= a.total_error + b.total_error


def test_eval_result_invariants():
    u = bump_quadratic_field()
    K = kernels.make_power_kernel(1.5, 1)
    res = evaluate_linear(K, u, [0.0], QuadratureScheme())
    from nlbellman import tail_bound
    plan = field_plan(1.5, QuadratureScheme(), H, 1)
    closed_form = tail_bound(u.sup_norm, QuadratureScheme().outer_radius, 1.5, K.Lam, 1)
    assert 0.0 <= res.tail_error <= closed_form
    assert res.inner_error >= 0.0
    assert plan.far_radius == pytest.approx(8.0 * 32.0)


# -- n = 2 smoke case ---------------------------------------------------------

def test_2d_smoke_quadratic_bump_and_sandwich():
    h2 = 1.0 / 32.0
    u = bump_quadratic_field(h=h2, dimension=2)
    sigma = 1.5
    # oracle: 2 (2-s) * 2pi * int r^2 eta(r) r^{-1-s} dr, via scipy.quad offline
    exact = 10.860946526255137
    v = fractional_laplacian(u, [0.0, 0.0], sigma, QuadratureScheme())
    assert v == pytest.approx(exact, rel=0.04)

    rng = np.random.default_rng(21)
    m = int(round(4 / h2)) + 1
    from nlbellman import ScalarField
    ur = ScalarField(2, h2, 2.0, rng.uniform(-1, 1, (m, m)), closures.constant(0.0))
    bounds = EllipticityBounds(1.0, 1.5)
    K = kernels.make_anisotropic_kernel(
        sigma, 2, {"kind": "cos2", "params": {"base": 1.0, "amplitude": 0.5}}, bounds)
    q = QuadratureScheme()
    plan = field_plan(sigma, q, h2, 2)
    for x in ([0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]):
        L = evaluate_linear(K, ur, x, q, plan=plan, with_errors=False).value
        mp = evaluate_pucci(ur, x, bounds, sigma, "+", q, plan=plan, with_errors=False).value
        mm = evaluate_pucci(ur, x, bounds, sigma, "-", q, plan=plan, with_errors=False).value
        assert mm <= L <= mp
