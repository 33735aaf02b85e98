"""Singularity-split quadrature for second-difference integrals.

Every operator here integrates delta-u(x, y) against a kernel comparable to
(2-sigma)/|y|^{n+sigma}.  The quadrature factors each kernel as that power
law times a bounded amplitude and integrates the power law *exactly* per
radial shell, sampling only the smooth amplitude and delta-u:

* core, |y| < r0: the second-order Taylor form of delta-u along a fixed set
  of grid-exact directions, contracted with the analytic moment of the power
  law (no sampling of the singularity at all);
* ring, r0 <= |y| <= R_tail: log-spaced shells x uniform angles, one node per
  cell at the radius that integrates pure quadratics exactly;
* tail, R_tail < |y| <= far_radius: the same with coarser shells, values
  supplied by the exterior closure.

Weights are nonnegative by construction, which is what makes every
comparison-principle statement exact at node level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, ValidationError

SPHERE_MEASURE = {1: 2.0, 2: 2.0 * np.pi}


def tail_bound(sup_norm: float, R_tail: float, sigma: float, Lam: float, dimension: int) -> float:
    """Truncation bound 4 sup|u| Lam (2-sigma) omega_n R^{-sigma} / sigma."""
    if R_tail <= 0:
        raise ValidationError("tail radius must be positive")
    omega = SPHERE_MEASURE[dimension]
    return 4.0 * sup_norm * Lam * (2.0 - sigma) * omega * R_tail ** (-sigma) / sigma


@dataclass(frozen=True)
class QuadratureScheme:
    """Node layout parameters for the core/ring/tail split.

    ``inner_radius`` defaults to the grid spacing of the field being
    evaluated (it must never exceed it); ``outer_radius`` is the ring/tail
    boundary R_tail; the far tail extends to ``tail_factor * outer_radius``
    with ``tail_nodes_per_decade`` shells per decade (defaults to a quarter
    of ``nodes_per_decade``).
    """

    inner_radius: float | None = None
    outer_radius: float = 8.0
    nodes_per_decade: int = 32
    angular_nodes: int = 16
    interpolation_order: int = 1
    tail_factor: float = 32.0
    tail_nodes_per_decade: int | None = None

    def __post_init__(self):
        if self.inner_radius is not None and self.inner_radius <= 0:
            raise ValidationError("inner radius must be positive")
        if self.outer_radius <= 0:
            raise ValidationError("outer radius must be positive")
        if self.nodes_per_decade < 2:
            raise ValidationError("need at least 2 radial nodes per decade")
        if self.angular_nodes < 8 or self.angular_nodes % 4 != 0:
            raise ValidationError("angular_nodes must be a multiple of 4, at least 8")
        if self.interpolation_order != 1:
            raise ValidationError("only multilinear interpolation (order 1) is supported")
        if self.tail_factor < 1.0:
            raise ValidationError("tail_factor must be at least 1")

    def key(self) -> tuple:
        return (
            self.inner_radius,
            self.outer_radius,
            self.nodes_per_decade,
            self.angular_nodes,
            self.interpolation_order,
            self.tail_factor,
            self.tail_nodes_per_decade,
        )


def shell_edges(r_lo: float, r_hi: float, nodes_per_decade: int) -> np.ndarray:
    """Geometric shell boundaries covering [r_lo, r_hi] exactly."""
    if r_hi <= r_lo:
        return np.array([r_lo])
    count = max(1, math.ceil(nodes_per_decade * math.log10(r_hi / r_lo)))
    return r_lo * (r_hi / r_lo) ** (np.arange(count + 1) / count)


def shell_samples(sigma: float, edges: np.ndarray):
    """Exact power-law mass and quadratic-exact sample radius per shell.

    For each shell [r1, r2] the weight is (2-sigma) int r^{-1-sigma} dr and
    the node sits where a pure quadratic integrand is integrated exactly.
    """
    r1, r2 = edges[:-1], edges[1:]
    mass = (2.0 - sigma) * (r1 ** (-sigma) - r2 ** (-sigma)) / sigma
    num = sigma * (r2 ** (2.0 - sigma) - r1 ** (2.0 - sigma))
    den = (2.0 - sigma) * (r1 ** (-sigma) - r2 ** (-sigma))
    r_star = np.sqrt(num / den)
    return r_star, mass


def core_offsets(dimension: int):
    """Half-space core directions as exact integer grid offsets.

    Returns (offsets, measures): each offset o stands for the direction pair
    +-o/|o| with angular measure already doubled for the pair.  All offsets
    are grid-exact so the core second differences need no interpolation at
    grid-aligned evaluation points.
    """
    if dimension == 1:
        return np.array([[1.0]]), np.array([2.0])
    offs = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
    meas = np.full(4, 2.0 * (2.0 * np.pi / 8.0))
    return offs, meas


def angular_directions(dimension: int, angular_nodes: int):
    """Half-space ring directions and their (paired) angular measures."""
    if dimension == 1:
        return np.array([[1.0]]), np.array([2.0])
    half = angular_nodes // 2
    phi = (np.arange(half) + 0.5) * (2.0 * np.pi / angular_nodes)
    dirs = np.column_stack([np.cos(phi), np.sin(phi)])
    meas = np.full(half, 2.0 * (2.0 * np.pi / angular_nodes))
    return dirs, meas


@dataclass(frozen=True, eq=False)
class SamplePlan:
    """Frozen node/weight layout for one (sigma, scheme, grid) combination.

    ``displacements`` holds one representative y per +-y pair; ``weights``
    are the paired nonnegative base masses of the power-law kernel over each
    cell (for core atoms: angular measure x radial moment / step^2, i.e. the
    multiplier of a discrete directional second derivative).  Kernel-specific
    amplitudes are supplied separately by :func:`amplitudes`.
    """

    sigma: float
    dimension: int
    h: float
    r0: float
    ring_end: float
    far_radius: float | None
    displacements: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    is_core: np.ndarray = field(repr=False)
    amp_radii: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.displacements.shape[0]

    def ball_mask(self, radius: float) -> np.ndarray:
        r = np.sqrt(np.sum(self.displacements**2, axis=1))
        return np.where(self.is_core, True, r <= radius)


def _build_plan(sigma, dimension, h, r0, ring_end, far_radius, nodes_per_decade,
                angular_nodes, tail_npd) -> SamplePlan:
    ys, ws, radii, core_flags = [], [], [], []

    # core: analytic radial moment contracted with directional second differences
    offs, meas = core_offsets(dimension)
    m_rad = r0 ** (2.0 - sigma)  # (2-sigma) int_0^{r0} r^{1-sigma} dr
    steps_sq = h * h * np.sum(offs * offs, axis=1)
    ys.append(h * offs)
    ws.append(meas * m_rad / steps_sq)
    radii.append(np.full(len(offs), r0))
    core_flags.append(np.ones(len(offs), dtype=bool))

    dirs, dmeas = angular_directions(dimension, angular_nodes)

    def add_shells(r_lo, r_hi, npd):
        if r_hi <= r_lo * (1.0 + 1e-12):
            return
        r_star, mass = shell_samples(sigma, shell_edges(r_lo, r_hi, npd))
        ys.append((r_star[:, None, None] * dirs[None, :, :]).reshape(-1, dimension))
        ws.append((mass[:, None] * dmeas[None, :]).ravel())
        radii.append(np.repeat(r_star, len(dirs)))
        core_flags.append(np.zeros(len(r_star) * len(dirs), dtype=bool))

    add_shells(r0, ring_end, nodes_per_decade)
    if far_radius is not None and far_radius > ring_end:
        add_shells(ring_end, far_radius, tail_npd)

    plan = SamplePlan(
        sigma=sigma,
        dimension=dimension,
        h=h,
        r0=r0,
        ring_end=ring_end,
        far_radius=far_radius,
        displacements=np.ascontiguousarray(np.vstack(ys)),
        weights=np.ascontiguousarray(np.concatenate(ws)),
        is_core=np.concatenate(core_flags),
        amp_radii=np.concatenate(radii),
    )
    if not np.all(np.isfinite(plan.weights)) or np.any(plan.weights < 0):
        raise ConfigurationError(
            "quadrature weights overflow or lose positivity; sigma too close to 2 "
            "for this inner radius, or degenerate shell layout"
        )
    return plan


_PLAN_CACHE: dict = {}


def field_plan(sigma: float, scheme: QuadratureScheme, h: float, dimension: int,
               cap_radius: float | None = None, coarse: bool = False) -> SamplePlan:
    """Sample plan for field-based evaluation on a grid of spacing h.

    ``cap_radius`` restricts the integral to the ball of that radius (used by
    the masked diagnostics over B_{1/2}); otherwise the plan covers the ring
    up to ``scheme.outer_radius`` plus the far tail.  ``coarse=True`` halves
    the radial resolution (the Richardson pair for error estimates).
    """
    r0 = scheme.inner_radius if scheme.inner_radius is not None else h
    if not (0.0 < r0 <= h * (1.0 + 1e-12)):
        raise ConfigurationError(f"inner radius {r0} must lie in (0, h={h}]")
    key = (round(sigma, 15), dimension, h, cap_radius, coarse, scheme.key())
    plan = _PLAN_CACHE.get(key)
    if plan is not None:
        return plan

    npd = scheme.nodes_per_decade
    tail_npd = scheme.tail_nodes_per_decade or max(4, npd // 4)
    if coarse:
        npd = max(2, npd // 2)
        tail_npd = max(2, tail_npd // 2)

    if cap_radius is not None:
        if cap_radius < r0:
            raise ConfigurationError("cap radius must be at least the inner radius")
        ring_end, far = cap_radius, None
    else:
        ring_end = scheme.outer_radius
        if h > ring_end:
            raise ConfigurationError(f"grid spacing {h} exceeds the ring radius {ring_end}")
        far = scheme.outer_radius * scheme.tail_factor

    plan = _build_plan(sigma, dimension, h, r0, ring_end, far, npd,
                       scheme.angular_nodes, tail_npd)
    _PLAN_CACHE[key] = plan
    return plan


@lru_cache(maxsize=512)
def amplitudes(kernel, plan: SamplePlan) -> np.ndarray:
    """Paired kernel amplitudes at the plan nodes.

    Ring/tail atoms sample the amplitude at the node itself; core atoms at
    radius r0 along the direction (so a blend supported strictly inside the
    inner radius is exactly invisible).  Each value is averaged over the +-y
    pair, which is why only the even part of a kernel ever matters.
    """
    y = plan.displacements.copy()
    r = np.sqrt(np.sum(y * y, axis=1))
    core = plan.is_core
    y[core] *= (plan.amp_radii[core] / r[core])[:, None]
    amp = 0.5 * (kernel.amplitude(y) + kernel.amplitude(-y))
    amp.setflags(write=False)
    return amp
