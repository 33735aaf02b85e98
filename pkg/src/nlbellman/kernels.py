"""Kernels of the uniform-ellipticity classes L0, L1, L2.

Every kernel here is a positive density on R^n \\ {0} comparable to the
fractional-order power law (2-sigma)/|y|^{n+sigma}.  The ratio against that
power law (the *amplitude*) is the quantity quadrature actually samples, so
kernels expose both ``density`` and ``amplitude``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError

SIGMA_MAX = 2.0 - 1e-6

# Heuristic slack multiplier applied to the L1/L2 derivative caps when a
# kernel does not carry analytic constants of its own.
_CLASS_CAP_FACTOR = 8.0


def smoothstep(r) -> np.ndarray:
    """Radial C^2 cutoff: 1 for r <= 1/2, 0 for r >= 1, quintic in between.

    The middle branch is 1 - s^3 (6 s^2 - 15 s + 10) with s = 2r - 1, which
    matches value and first two derivatives at both junctions.
    """
    r = np.asarray(r, dtype=float)
    s = np.clip(2.0 * r - 1.0, 0.0, 1.0)
    mid = 1.0 - s**3 * (6.0 * s * s - 15.0 * s + 10.0)
    return np.where(r <= 0.5, 1.0, np.where(r >= 1.0, 0.0, mid))


@dataclass(frozen=True)
class EllipticityBounds:
    """Constants 0 < lam <= Lam pinching a kernel against the power law."""

    lam: float
    Lam: float

    def __post_init__(self):
        if not (0.0 < self.lam <= self.Lam):
            raise ValidationError(
                f"ellipticity bounds need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})"
            )


@dataclass(frozen=True, eq=False)
class Kernel:
    """Immutable kernel density with ellipticity metadata.

    Parameters
    ----------
    dimension : int
        Ambient dimension, 1 or 2.
    sigma : float
        Order of the operator, in (0, 2).
    bounds : EllipticityBounds
        Pinching constants: (2-sigma) lam / |y|^{n+sigma} <= K <= the same
        with Lam, at every y != 0.
    density : callable
        Vectorized map from an (m, n) array of offsets to (m,) densities.
    smoothness_class : str
        One of ``L0``, ``L1``, ``L2`` (each class contains the next).
    c1_bound, c2_bound : float, optional
        Constants for |grad K| <= c1 / |y|^{n+1+sigma} and
        |D^2 K| <= c2 / |y|^{n+2+sigma}, when known analytically.
    descriptor : dict, optional
        JSON-serializable construction recipe; None for ad-hoc densities.

    Density evaluation is a pure read and safe to call concurrently.
    """

    dimension: int
    sigma: float
    bounds: EllipticityBounds
    density: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    smoothness_class: str = "L0"
    c1_bound: Optional[float] = None
    c2_bound: Optional[float] = None
    descriptor: Optional[dict] = None

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValidationError(f"dimension must be 1 or 2, got {self.dimension}")
        _check_sigma(self.sigma)
        if self.smoothness_class not in ("L0", "L1", "L2"):
            raise ValidationError(f"unknown smoothness class {self.smoothness_class!r}")

    @property
    def lam(self) -> float:
        return self.bounds.lam

    @property
    def Lam(self) -> float:
        return self.bounds.Lam

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.density(np.atleast_2d(np.asarray(points, dtype=float)))

    def amplitude(self, points: np.ndarray) -> np.ndarray:
        """Density divided by the power law (2-sigma)/|y|^{n+sigma}."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.sqrt(np.sum(pts * pts, axis=1))
        return self.density(pts) * r ** (self.dimension + self.sigma) / (2.0 - self.sigma)


@dataclass(frozen=True)
class ClassReport:
    """Outcome of the sampled smoothness-class tests.

    ``witnessed_constants`` is (lam_emp, Lam_emp, C1_emp, C2_emp);
    ``worst_points`` maps each failed test to its worst sample point.
    The booleans are nested by construction: is_L2 implies is_L1 implies is_L0.
    """

    is_L0: bool
    is_L1: bool
    is_L2: bool
    witnessed_constants: tuple
    worst_points: dict
    even_ok: bool


def _check_sigma(sigma: float):
    if not (0.0 < sigma < SIGMA_MAX):
        raise ValidationError(
            f"sigma must lie in (0, {SIGMA_MAX}) to stay away from the order-2 "
            f"singularity of the representation; got {sigma}"
        )


def _power_density(sigma: float, n: int) -> Callable[[np.ndarray], np.ndarray]:
    def density(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.sqrt(np.sum(pts * pts, axis=1))
        return (2.0 - sigma) / r ** (n + sigma)

    return density


def make_power_kernel(sigma: float, dimension: int) -> Kernel:
    """Kernel of the (unnormalized) fractional Laplacian of order sigma.

    K(y) = (2 - sigma) / |y|^{n+sigma}; lambda = Lambda = 1, class L2.
    """
    _check_sigma(sigma)
    if dimension not in (1, 2):
        raise ValidationError(f"dimension must be 1 or 2, got {dimension}")
    n = dimension
    # |K'| = (2-sigma)(n+sigma)/r^{n+1+sigma}, |K''| = (2-sigma)(n+sigma)(n+1+sigma)/r^{n+2+sigma}
    c1 = (2.0 - sigma) * (n + sigma) * 1.05
    c2 = (2.0 - sigma) * (n + sigma) * (n + 1 + sigma) * 1.05
    return Kernel(
        dimension=n,
        sigma=sigma,
        bounds=EllipticityBounds(1.0, 1.0),
        density=_power_density(sigma, n),
        smoothness_class="L2",
        c1_bound=c1,
        c2_bound=c2,
        descriptor={"type": "power", "sigma": sigma, "dimension": n},
    )


# ---------------------------------------------------------------------------
# angular profiles for anisotropic kernels
# ---------------------------------------------------------------------------

def _profile_constant(params):
    value = float(params.get("value", 1.0))
    return (lambda theta: np.full(np.atleast_2d(theta).shape[0], value)), "L2"


def _profile_cos2(params):
    # base + amplitude * cos^2(angle): smooth and even, n=2 only.
    base = float(params.get("base", 1.0))
    amplitude = float(params.get("amplitude", 0.5))

    def fn(theta):
        theta = np.atleast_2d(theta)
        return base + amplitude * theta[:, 0] ** 2

    return fn, "L2"


def _profile_fourier(params):
    # base + sum_j coeffs[j] * cos(2 (j+1) angle): even trigonometric profile.
    base = float(params.get("base", 1.0))
    coeffs = [float(c) for c in params.get("coeffs", [0.25])]

    def fn(theta):
        theta = np.atleast_2d(theta)
        ang = np.arctan2(theta[:, 1], theta[:, 0]) if theta.shape[1] == 2 else np.zeros(theta.shape[0])
        out = np.full(theta.shape[0], base)
        for j, c in enumerate(coeffs):
            out = out + c * np.cos(2.0 * (j + 1) * ang)
        return out

    return fn, "L2"


_PROFILES = {
    "constant": _profile_constant,
    "cos2": _profile_cos2,
    "fourier": _profile_fourier,
}


def make_profile(descriptor: dict):
    if not isinstance(descriptor, dict) or "kind" not in descriptor:
        raise ValidationError("profile descriptor must be a dict with a 'kind' key")
    kind = descriptor["kind"]
    if kind not in _PROFILES:
        raise ValidationError(f"unknown profile kind {kind!r}")
    fn, klass = _PROFILES[kind](dict(descriptor.get("params", {})))
    return fn, klass


def make_anisotropic_kernel(
    sigma: float,
    dimension: int,
    profile,
    bounds: EllipticityBounds,
    smoothness_class: Optional[str] = None,
) -> Kernel:
    """Kernel (2-sigma) profile(y/|y|) / |y|^{n+sigma}.

    ``profile`` is either a descriptor dict (serializable) or a callable on
    unit vectors; it must be even and take values inside [lam, Lam].
    """
    _check_sigma(sigma)
    descriptor = None
    if isinstance(profile, dict):
        descriptor = {
            "type": "anisotropic",
            "sigma": sigma,
            "dimension": dimension,
            "lambda": bounds.lam,
            "Lambda": bounds.Lam,
            "profile": profile,
        }
        profile_fn, klass = make_profile(profile)
    else:
        profile_fn, klass = profile, "L0"
    if smoothness_class is not None:
        klass = smoothness_class

    # Validate range and evenness on a deterministic sphere sample.
    if dimension == 1:
        sphere = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
        sphere = np.column_stack([np.cos(ang), np.sin(ang)])
    vals = np.asarray(profile_fn(sphere), dtype=float)
    slack = 1e-12 * max(1.0, bounds.Lam)
    if np.any(vals < bounds.lam - slack) or np.any(vals > bounds.Lam + slack):
        raise ValidationError(
            f"profile values escape [{bounds.lam}, {bounds.Lam}]: "
            f"range [{vals.min()}, {vals.max()}]"
        )
    mirrored = np.asarray(profile_fn(-sphere), dtype=float)
    if np.max(np.abs(vals - mirrored)) > 1e-9 * max(1.0, bounds.Lam):
        raise ValidationError("profile must be even on the unit sphere")

    n = dimension

    def density(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.sqrt(np.sum(pts * pts, axis=1))
        theta = pts / r[:, None]
        return (2.0 - sigma) * np.asarray(profile_fn(theta), dtype=float) / r ** (n + sigma)

    return Kernel(
        dimension=n,
        sigma=sigma,
        bounds=bounds,
        density=density,
        smoothness_class=klass,
        descriptor=descriptor,
    )


def make_radial_kernel(
    sigma: float,
    dimension: int,
    amplitude_fn: Callable[[np.ndarray], np.ndarray],
    bounds: EllipticityBounds,
    smoothness_class: str = "L0",
    descriptor: Optional[dict] = None,
) -> Kernel:
    """Kernel (2-sigma) a(|y|) / |y|^{n+sigma} from a radial amplitude a."""
    _check_sigma(sigma)
    n = dimension

    def density(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.sqrt(np.sum(pts * pts, axis=1))
        return (2.0 - sigma) * np.asarray(amplitude_fn(r), dtype=float) / r ** (n + sigma)

    return Kernel(
        dimension=n,
        sigma=sigma,
        bounds=bounds,
        density=density,
        smoothness_class=smoothness_class,
        descriptor=descriptor,
    )


def make_log_wobble_kernel(
    sigma: float,
    dimension: int,
    base: float = 1.5,
    amplitude: float = 0.5,
    omega: float = 1.0,
    phase: float = 0.0,
) -> Kernel:
    """Radial kernel with amplitude base + amplitude*cos(omega log r + phase).

    Smooth away from the origin with derivative growth matching the L2 caps,
    yet genuinely non-homogeneous: the workhorse second kernel of the derived
    Bellman instances.
    """
    lam = base - abs(amplitude)
    Lam = base + abs(amplitude)
    if lam <= 0:
        raise ValidationError("log-wobble amplitude exceeds its base level")

    def amp(r):
        r = np.asarray(r, dtype=float)
        return base + amplitude * np.cos(omega * np.log(r) + phase)

    return make_radial_kernel(
        sigma,
        dimension,
        amp,
        EllipticityBounds(lam, Lam),
        smoothness_class="L2",
        descriptor={
            "type": "log_wobble",
            "sigma": sigma,
            "dimension": dimension,
            "base": base,
            "amplitude": amplitude,
            "omega": omega,
            "phase": phase,
        },
    )


def scaled_power_kernel(sigma: float, dimension: int, factor: float) -> Kernel:
    """Constant multiple of the power kernel: lambda = Lambda = factor."""
    if factor <= 0:
        raise ValidationError("scale factor must be positive")
    base = make_power_kernel(sigma, dimension)

    def density(points):
        return factor * base.density(points)

    return Kernel(
        dimension=dimension,
        sigma=sigma,
        bounds=EllipticityBounds(factor, factor),
        density=density,
        smoothness_class="L2",
        c1_bound=factor * base.c1_bound,
        c2_bound=factor * base.c2_bound,
        descriptor={
            "type": "scaled_power",
            "sigma": sigma,
            "dimension": dimension,
            "factor": factor,
        },
    )


def regularize_kernel(kernel: Kernel, epsilon: float, lam: float) -> Kernel:
    """Blend the kernel into lam * power law inside the ball of radius epsilon.

    K_eps(y) = eta(|y|/eps) lam (2-sigma)/|y|^{n+sigma} + (1 - eta(|y|/eps)) K(y)
    with the quintic ``smoothstep`` eta.  Outside B_eps the kernel is untouched
    (eta = 0 there), and the smoothness class tag is preserved.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon}")
    if lam <= 0:
        raise ValidationError("blend level lambda must be positive")
    sigma, n = kernel.sigma, kernel.dimension
    base_density = kernel.density

    def density(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.sqrt(np.sum(pts * pts, axis=1))
        eta = smoothstep(r / epsilon)
        base = base_density(pts)
        out = base.copy()
        inside = eta > 0.0
        if np.any(inside):
            power = lam * (2.0 - sigma) / r[inside] ** (n + sigma)
            out[inside] = eta[inside] * power + (1.0 - eta[inside]) * base[inside]
        return out

    descriptor = None
    if kernel.descriptor is not None:
        descriptor = {
            "type": "regularized",
            "epsilon": epsilon,
            "lambda": lam,
            "base": kernel.descriptor,
        }
    return Kernel(
        dimension=n,
        sigma=sigma,
        bounds=EllipticityBounds(min(lam, kernel.lam), max(lam, kernel.Lam)),
        density=density,
        smoothness_class=kernel.smoothness_class,
        descriptor=descriptor,
    )


def symmetrize(kernel: Kernel) -> Kernel:
    """Replace the density by its even part (K(y) + K(-y)) / 2.

    The second-difference form of every operator here only sees the even part,
    so this changes nothing downstream; idempotent.
    """
    base_density = kernel.density

    def density(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return 0.5 * (base_density(pts) + base_density(-pts))

    return replace(kernel, density=density, descriptor=None)


def classify_kernel(kernel: Kernel, sample_count: int = 400, angular_count: int = 16) -> ClassReport:
    """Test the L0/L1/L2 bounds on a deterministic sample set.

    Radii are log-uniform in [1e-3, 1e3] (``sample_count`` of them); in two
    dimensions each radius is paired with ``angular_count`` uniform angles.
    Gradients and Hessians are central differences with step |y| * 1e-4.
    Derivative caps come from the kernel's stored constants when present,
    otherwise from a generous power-law heuristic; the empirical constants
    are always reported so callers can judge for themselves.
    """
    if sample_count < 100:
        raise ValidationError("sample_count must be at least 100")
    n, sigma = kernel.dimension, kernel.sigma
    radii = np.geomspace(1e-3, 1e3, sample_count)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = (np.arange(angular_count) + 0.5) * (2.0 * np.pi / angular_count)
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    r = np.sqrt(np.sum(pts * pts, axis=1))

    try:
        vals = np.asarray(kernel.density(pts), dtype=float)
        mirror = np.asarray(kernel.density(-pts), dtype=float)
    except Exception as exc:  # surface the offending point, per contract
        raise ValidationError(f"density evaluation failed on the sample set: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        bad = pts[~np.isfinite(vals)][0]
        raise ValidationError(f"density is not finite at sample point {bad}")

    worst_points: dict = {}

    scale = np.maximum(np.abs(vals), np.abs(mirror))
    even_err = np.abs(vals - mirror)
    even_ok = bool(np.all(even_err <= 1e-9 * np.maximum(scale, 1e-300)))
    if not even_ok:
        worst_points["evenness"] = pts[int(np.argmax(even_err / np.maximum(scale, 1e-300)))].tolist()

    amp = vals * r ** (n + sigma) / (2.0 - sigma)
    lam_emp = float(np.min(amp))
    Lam_emp = float(np.max(amp))
    slack = 1e-9 * max(1.0, kernel.Lam)
    is_L0 = (lam_emp >= kernel.lam - slack) and (Lam_emp <= kernel.Lam + slack)
    if not is_L0:
        idx = int(np.argmin(amp)) if kernel.lam - lam_emp > Lam_emp - kernel.Lam else int(np.argmax(amp))
        worst_points["L0"] = pts[idx].tolist()

    # central differences, one axis at a time
    step = (r * 1e-4)[:, None]
    grad_sq = np.zeros(len(pts))
    hess_max = np.zeros(len(pts))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        plus = np.asarray(kernel.density(pts + step * e), dtype=float)
        minus = np.asarray(kernel.density(pts - step * e), dtype=float)
        di = (plus - minus) / (2.0 * step[:, 0])
        grad_sq += di * di
        hess_max = np.maximum(hess_max, np.abs((plus - 2.0 * vals + minus) / step[:, 0] ** 2))
    if n == 2:
        # largest mixed second difference completes the Hessian magnitude
        ex = np.array([1.0, 0.0])
        ey = np.array([0.0, 1.0])
        pp = np.asarray(kernel.density(pts + step * (ex + ey)), dtype=float)
        mm = np.asarray(kernel.density(pts - step * (ex + ey)), dtype=float)
        pm = np.asarray(kernel.density(pts + step * (ex - ey)), dtype=float)
        mp = np.asarray(kernel.density(pts - step * (ex - ey)), dtype=float)
        hess_max = np.maximum(hess_max, np.abs((pp + mm - pm - mp) / (4.0 * step[:, 0] ** 2)))

    c1_ratio = np.sqrt(grad_sq) * r ** (n + 1 + sigma)
    c2_ratio = hess_max * r ** (n + 2 + sigma)
    C1_emp = float(np.max(c1_ratio))
    C2_emp = float(np.max(c2_ratio))

    cap1 = kernel.c1_bound if kernel.c1_bound is not None else \
        _CLASS_CAP_FACTOR * (n + 1 + sigma) * (2.0 - sigma) * kernel.Lam
    cap2 = kernel.c2_bound if kernel.c2_bound is not None else \
        _CLASS_CAP_FACTOR * (n + 1 + sigma) * (n + 2 + sigma) * (2.0 - sigma) * kernel.Lam

    is_L1 = bool(is_L0 and C1_emp <= cap1)
    if is_L0 and not is_L1:
        worst_points["L1"] = pts[int(np.argmax(c1_ratio))].tolist()
    is_L2 = bool(is_L1 and C2_emp <= cap2)
    if is_L1 and not is_L2:
        worst_points["L2"] = pts[int(np.argmax(c2_ratio))].tolist()

    return ClassReport(
        is_L0=bool(is_L0),
        is_L1=is_L1,
        is_L2=is_L2,
        witnessed_constants=(lam_emp, Lam_emp, C1_emp, C2_emp),
        worst_points=worst_points,
        even_ok=even_ok,
    )


def kernel_from_descriptor(descriptor: dict) -> Kernel:
    """Rebuild a kernel from its serializable descriptor."""
    if not isinstance(descriptor, dict) or "type" not in descriptor:
        raise ValidationError("kernel descriptor must be a dict with a 'type' key")
    kind = descriptor["type"]
    if kind == "power":
        return make_power_kernel(descriptor["sigma"], descriptor["dimension"])
    if kind == "scaled_power":
        return scaled_power_kernel(descriptor["sigma"], descriptor["dimension"], descriptor["factor"])
    if kind == "anisotropic":
        return make_anisotropic_kernel(
            descriptor["sigma"],
            descriptor["dimension"],
            descriptor["profile"],
            EllipticityBounds(descriptor["lambda"], descriptor["Lambda"]),
        )
    if kind == "log_wobble":
        return make_log_wobble_kernel(
            descriptor["sigma"],
            descriptor["dimension"],
            base=descriptor.get("base", 1.5),
            amplitude=descriptor.get("amplitude", 0.5),
            omega=descriptor.get("omega", 1.0),
            phase=descriptor.get("phase", 0.0),
        )
    if kind == "regularized":
        base = kernel_from_descriptor(descriptor["base"])
        return regularize_kernel(base, descriptor["epsilon"], descriptor["lambda"])
    raise ValidationError(f"unknown kernel type {kind!r}")
