"""Shared fixtures: the derived 1D two-kernel instance, schemes, and oracles."""

import numpy as np
import pytest

from nlbellman import (BellmanProblem, QuadratureScheme, ScalarField, closures,
                       discretize, kernels, solve_dirichlet)
from nlbellman.closures import make_closure

# Reference values computed once with high-resolution adaptive quadrature
# (scipy.integrate.quad on the defining integrals) and frozen here; the 1D
# symbol constant also agrees with the closed form -Gamma(-s) cos(pi s / 2)
# to ten digits.
S1_POWER_1D_SIGMA15 = 3.3421710328413337   # int 2(1-cos y) (2-s)/|y|^{1+s} dy, s=1.5
FLAP_BUMPQUAD_SIGMA1999 = 3.998817124743467  # x^2*bump field at 0, s=1.999
FLAP_BUMPQUAD_SIGMA15 = 3.457146652620511    # same field at s=1.5
S1_POWER_2D_SIGMA15 = 5.8422432060542855     # 2D symbol at |xi|=1, s=1.5

H_DEFAULT = 1.0 / 64.0


def default_exterior():
    """Asymmetric two-bump exterior data of the derived instance."""
    return make_closure({
        "kind": "bumps",
        "params": {"bumps": [
            {"center": [1.15], "width": 0.3, "height": 1.0},
            {"center": [-1.3], "width": 0.4, "height": 0.4},
        ]},
    })


def two_kernel_family(sigma=1.5, h=H_DEFAULT, offsets=None, box_radius=2.0):
    """The derived 1D instance: scaled power vs log-wobble, bounds (1, 2)."""
    return BellmanProblem(
        kernels=(
            kernels.scaled_power_kernel(sigma, 1, 2.0),
            kernels.make_log_wobble_kernel(sigma, 1, base=1.5, amplitude=0.5, omega=2.0),
        ),
        exterior=default_exterior(),
        h=h,
        offsets=offsets,
        box_radius=box_radius,
    )


def random_bounded_field(rng, h=H_DEFAULT, box_radius=2.0, scale=1.0):
    m = int(round(2 * box_radius / h)) + 1
    return ScalarField(1, h, box_radius, scale * rng.uniform(-1.0, 1.0, m),
                       closures.constant(0.0))


def random_l0_kernel(rng, sigma=1.5, lam=1.0, Lam=2.0, dimension=1):
    """A random kernel of the base ellipticity class: clipped log-trig amplitude."""
    c = 0.5 * (lam + Lam)
    a1, a2 = rng.uniform(0.1, 0.45, 2)
    w1, w2 = rng.uniform(0.5, 4.0, 2)
    p1, p2 = rng.uniform(0.0, 2 * np.pi, 2)

    def amp(r):
        r = np.asarray(r, dtype=float)
        raw = c + a1 * np.cos(w1 * np.log(r) + p1) + a2 * np.sin(w2 * np.log(r) + p2)
        return np.clip(raw, lam, Lam)

    return kernels.make_radial_kernel(sigma, dimension, amp,
                                      kernels.EllipticityBounds(lam, Lam))


def value_iteration_oracle(stencils, tol=1e-8, max_sweeps=500_000):
    """Independent solver: explicit damped fixed point on the same stencils.

    u <- u + tau * min_a (A_a u + c_a + b_a) with per-node damping from the
    policy-wise worst diagonal; converges geometrically for monotone rows.
    """
    NI = stencils.n_interior
    diag = np.max([np.abs(np.diag(A)) for A in stencils.A], axis=0)
    tau = 1.0 / diag
    u = np.zeros(NI)
    for sweep in range(max_sweeps):
        r = stencils.bellman_values(u).min(axis=0)
        if np.max(np.abs(r)) <= tol:
            return u, sweep
        u = u + tau * r
    raise AssertionError(f"value iteration did not converge within {max_sweeps} sweeps")


@pytest.fixture(scope="session")
def scheme():
    return QuadratureScheme()


@pytest.fixture(scope="session")
def derived_instance(scheme):
    """Solved two-kernel instance shared by the diagnostics tests."""
    problem = two_kernel_family()
    stencils = discretize(problem, scheme)
    solution = solve_dirichlet(problem, scheme, tol=1e-8, stencils=stencils)
    return problem, stencils, solution
