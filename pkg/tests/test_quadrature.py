import numpy as np
import pytest

from nlbellman import ConfigurationError, QuadratureScheme, ValidationError, tail_bound
from nlbellman.kernels import make_power_kernel
from nlbellman.quadrature import amplitudes, field_plan, shell_edges, shell_samples

H = 1.0 / 64.0


def test_tail_bound_values():
    assert tail_bound(0.0, 2.0, 1.5, 1.0, 1) == 0.0
    # 4 * 1 * 1 * (2-1.5) * 2 * 2^{-1.5} / 1.5
    assert tail_bound(1.0, 2.0, 1.5, 1.0, 1) == pytest.approx(0.9428090415820634)


def test_tail_bound_power_law_halving():
    b1 = tail_bound(1.0, 2.0, 1.5, 1.0, 1)
    b2 = tail_bound(1.0, 4.0, 1.5, 1.0, 1)
    assert b1 / b2 == pytest.approx(2**1.5, rel=1e-13)


def test_tail_bound_radius_guard():
    with pytest.raises(ValidationError):
        tail_bound(1.0, 0.0, 1.5, 1.0, 1)


@pytest.mark.parametrize("kwargs", [
    {"nodes_per_decade": 1},
    {"angular_nodes": 6},
    {"angular_nodes": 10},
    {"interpolation_order": 3},
    {"inner_radius": -0.1},
    {"outer_radius": 0.0},
    {"tail_factor": 0.5},
])
def test_scheme_validation(kwargs):
    with pytest.raises(ValidationError):
        QuadratureScheme(**kwargs)


def test_plan_weights_nonnegative_finite():
    for sigma in (1.1, 1.5, 1.9, 1.99):
        plan = field_plan(sigma, QuadratureScheme(), H, 1)
        assert np.all(plan.weights >= 0) and np.all(np.isfinite(plan.weights))


def test_plan_inner_radius_must_not_exceed_h():
    with pytest.raises(ConfigurationError):
        field_plan(1.5, QuadratureScheme(inner_radius=0.1), H, 1)


def test_shell_edges_cover_range():
    edges = shell_edges(0.01, 8.0, 32)
    assert edges[0] == pytest.approx(0.01)
    assert edges[-1] == pytest.approx(8.0)
    assert np.all(np.diff(edges) > 0)


def test_shell_samples_quadratic_exactness():
    # the node radius integrates r^2 against the power law exactly per shell
    sigma = 1.5
    edges = np.array([1.0, 2.0])
    r_star, mass = shell_samples(sigma, edges)
    exact = (2 - sigma) * (edges[1] ** (2 - sigma) - edges[0] ** (2 - sigma)) / (2 - sigma)
    assert r_star[0] ** 2 * mass[0] == pytest.approx(exact, rel=1e-13)
    assert edges[0] <= r_star[0] <= edges[1]


def test_core_nodes_grid_exact_2d():
    plan = field_plan(1.5, QuadratureScheme(), 1 / 32, 2)
    core = plan.displacements[plan.is_core]
    # axes at step h and diagonals at step h*sqrt(2), all integer multiples of h
    assert np.array_equal(core / (1 / 32),
                          np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]]))


def test_capped_plan_stays_in_half_ball():
    plan = field_plan(1.5, QuadratureScheme(), H, 1, cap_radius=0.5)
    assert plan.far_radius is None
    r = np.abs(plan.displacements[~plan.is_core, 0])
    assert np.all(r <= 0.5 + 1e-12)
    assert plan.ring_end == pytest.approx(0.5)


def test_amplitude_pairing_sees_even_part_only():
    base = make_power_kernel(1.5, 1)

    def density(pts):
        pts = np.atleast_2d(pts)
        return base.density(pts) * (1.0 + 0.3 * np.sign(pts[:, 0]))

    from dataclasses import replace
    K = replace(base, density=density, descriptor=None)
    plan = field_plan(1.5, QuadratureScheme(), H, 1)
    amp = amplitudes(K, plan)
    assert np.allclose(amp, 1.0, rtol=1e-13)


def test_plan_cache_returns_same_object():
    q = QuadratureScheme()
    assert field_plan(1.5, q, H, 1) is field_plan(1.5, q, H, 1)


def test_core_moment_total_mass_1d():
    # sum of core weights * step^2 equals the analytic moment r0^{2-sigma} * 2
    sigma = 1.7
    plan = field_plan(sigma, QuadratureScheme(), H, 1)
    core = plan.is_core
    s2 = np.sum(plan.displacements[core] ** 2, axis=1)
    assert float(np.sum(plan.weights[core] * s2)) == pytest.approx(2.0 * H ** (2 - sigma), rel=1e-13)
