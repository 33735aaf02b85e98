"""Fourier symbols of L0 kernels and two-sided power comparability.

The symbol of -L is s(xi) = int 2(1 - cos(y . xi)) K(y) dy.  The integrand
is nonnegative, quadratic near the origin, and oscillatory at scale 1/|xi|,
so the node layout is scaled with the frequency: the analytic-moment core
ends at ~ 1/(8|xi|), shells are subdivided to a quarter oscillation period,
and beyond ~ 128/|xi| the remaining mass is added exactly with the factor 2
(the mean of 2(1 - cos) over many periods).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, RefinementError, ValidationError
from .kernels import Kernel
from .quadrature import QuadratureScheme, angular_directions, shell_edges, shell_samples

_CORE_SCALE = 8.0     # core radius ~ 1/(8 |xi|): relative Taylor error < 0.2%
_FAR_SCALE = 128.0    # far radius ~ 128 / |xi|: > 20 oscillation periods
_MAX_SHELLS = 200_000


@dataclass(frozen=True)
class SymbolCurve:
    """Sampled symbol along a sweep: s(0) = 0, even, nonnegative."""

    xi_samples: tuple
    s_values: tuple
    sigma: float

    def __post_init__(self):
        for xi, s in zip(self.xi_samples, self.s_values):
            if s < 0:
                raise ValidationError(f"symbol value {s} < 0 at xi={xi}")
            if np.linalg.norm(xi) == 0.0 and s != 0.0:
                raise ValidationError("s(0) must be exactly 0")


@dataclass(frozen=True)
class ComparabilityFit:
    """Two-sided pinch c_low |xi|^sigma <= s(xi) <= C_high |xi|^sigma.

    The constants are the extreme sample ratios (so the pinch holds on every
    sample by construction); ``exponent_fit`` is the pooled log-log slope.
    """

    c_low: float
    C_high: float
    exponent_fit: float
    fit_residual: float
    curves: tuple = ()

    def __post_init__(self):
        if not (0.0 < self.c_low <= self.C_high):
            raise ValidationError("need 0 < c_low <= C_high")


def _oscillation_split(edges: np.ndarray, xi_norm: float) -> np.ndarray:
    """Subdivide shells so no shell is wider than a quarter period."""
    max_width = (np.pi / 2.0) / xi_norm
    widths = np.diff(edges)
    splits = np.maximum(1, np.ceil(widths / max_width).astype(int))
    total = int(np.sum(splits))
    if total > _MAX_SHELLS:
        raise RefinementError(
            f"resolving oscillation at |xi|={xi_norm} needs {total} shells",
            suggested_nodes_per_decade=None,
        )
    if total == len(widths):
        return edges
    out = [edges[:1]]
    for r1, r2, m in zip(edges[:-1], edges[1:], splits):
        out.append(r1 + (r2 - r1) * (np.arange(1, m + 1) / m))
    return np.concatenate(out)


def symbol(kernel: Kernel, xi, scheme: QuadratureScheme | None = None,
           adapt: bool = True) -> float:
    """Quadrature value of int 2(1 - cos(y . xi)) K(y) dy.

    With ``adapt=True`` (default) the node layout scales with |xi| as
    described in the module docstring, and the construction never runs out of
    resolution.  With ``adapt=False`` the scheme is used as given and a
    :class:`RefinementError` with a suggested node count is raised when the
    shells cannot resolve the oscillation.
    """
    scheme = scheme or QuadratureScheme()
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (kernel.dimension,):
        raise ValidationError(f"xi must have shape ({kernel.dimension},)")
    xi_norm = float(np.linalg.norm(xi))
    if xi_norm == 0.0:
        return 0.0

    sigma, n = kernel.sigma, kernel.dimension
    r0_base = scheme.inner_radius if scheme.inner_radius is not None else 0.125
    if adapt:
        r0 = min(r0_base, 1.0 / (_CORE_SCALE * xi_norm))
        far = _FAR_SCALE / xi_norm
        edges = _oscillation_split(shell_edges(r0, far, scheme.nodes_per_decade), xi_norm)
    else:
        r0 = r0_base
        far = scheme.outer_radius * scheme.tail_factor
        edges = shell_edges(r0, far, scheme.nodes_per_decade)
        max_width = float(np.max(np.diff(edges))) if len(edges) > 1 else 0.0
        quarter = (np.pi / 2.0) / xi_norm
        if max_width > quarter:
            needed = math.ceil(scheme.nodes_per_decade * max_width / quarter)
            raise RefinementError(
                f"|xi|={xi_norm} oscillates below the node resolution "
                f"(shell width {max_width:.3g} > quarter period {quarter:.3g})",
                suggested_nodes_per_decade=needed,
            )

    dirs, meas = angular_directions(n, scheme.angular_nodes)

    # core: (y . xi)^2 against the exact radial moment
    m_rad = r0 ** (2.0 - sigma)
    core_y = r0 * dirs
    core_amp = 0.5 * (kernel.amplitude(core_y) + kernel.amplitude(-core_y))
    core_phi = (core_y @ xi) ** 2 / r0**2 * m_rad  # = m_rad (theta . xi)^2
    parts = [meas * (core_amp * core_phi)]

    # ring: sampled 2(1 - cos)
    r_star, mass = shell_samples(sigma, edges)
    y = (r_star[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    amp = 0.5 * (kernel.amplitude(y) + kernel.amplitude(-y))
    phi = 2.0 * (1.0 - np.cos(y @ xi))
    w = (mass[:, None] * meas[None, :]).ravel()
    parts.append(w * (amp * phi))

    # beyond the far radius: exact remaining mass times the oscillation mean 2
    far_y = far * dirs
    far_amp = 0.5 * (kernel.amplitude(far_y) + kernel.amplitude(-far_y))
    far_mass = (2.0 - sigma) * far ** (-sigma) / sigma
    parts.append(meas * (far_amp * (2.0 * far_mass)))

    return float(np.sum(np.concatenate(parts)))


def default_directions(dimension: int) -> np.ndarray:
    if dimension == 1:
        return np.array([[1.0]])
    ang = np.array([0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4])
    return np.column_stack([np.cos(ang), np.sin(ang)])


def default_magnitudes(count: int = 16, lo: float = 0.25, hi: float = 64.0) -> np.ndarray:
    return np.geomspace(lo, hi, count)


def comparability_fit(kernel: Kernel, xi_magnitudes=None, directions=None,
                      scheme: QuadratureScheme | None = None) -> ComparabilityFit:
    """Pinch s(xi) between multiples of |xi|^sigma over a log-spaced sweep.

    ``c_low``/``C_high`` are the extreme values of s(xi)/|xi|^sigma over all
    samples; the exponent comes from a pooled least-squares fit of log s
    against log |xi|.
    """
    mags = np.asarray(xi_magnitudes if xi_magnitudes is not None else default_magnitudes(),
                      dtype=float)
    dirs = np.atleast_2d(np.asarray(directions if directions is not None
                                    else default_directions(kernel.dimension), dtype=float))
    if len(mags) < 8 or mags.max() / mags.min() < 99.0:
        raise ValidationError("need at least 8 magnitudes spanning two decades")

    sigma = kernel.sigma
    curves = []
    ratios = []
    logs = []
    for d in dirs:
        d = d / np.linalg.norm(d)
        xis = mags[:, None] * d[None, :]
        svals = np.array([symbol(kernel, xi, scheme) for xi in xis])
        if np.any(svals <= 0.0):
            bad = mags[int(np.argmin(svals))]
            raise DataError(f"nonpositive symbol sample at |xi|={bad}")
        curves.append(SymbolCurve(tuple(map(tuple, xis)), tuple(svals), sigma))
        ratios.append(svals / mags**sigma)
        logs.append(np.column_stack([np.log(mags), np.log(svals)]))

    ratios = np.concatenate(ratios)
    pooled = np.vstack(logs)
    A = np.column_stack([pooled[:, 0], np.ones(len(pooled))])
    coef, *_ = np.linalg.lstsq(A, pooled[:, 1], rcond=None)
    residuals = pooled[:, 1] - A @ coef
    return ComparabilityFit(
        c_low=float(np.min(ratios)),
        C_high=float(np.max(ratios)),
        exponent_fit=float(coef[0]),
        fit_residual=float(np.sqrt(np.mean(residuals**2))),
        curves=tuple(curves),
    )
