"""Analytic exterior closures.

A closure supplies field values on all of R^n, is bounded, and knows its own
sup bound.  Closures are the only mechanism for values outside the grid box:
the nonlocal tail must be controlled analytically, never extrapolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError


def _radii(points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.sqrt(np.sum(pts * pts, axis=1))


@dataclass(frozen=True, eq=False)
class Closure:
    """Bounded analytic function on R^n with a serializable descriptor.

    Parameters
    ----------
    kind : str
        Registry name (``constant``, ``cosine``, ...).
    params : dict
        Parameters the registry entry was built from.
    fn : callable
        Vectorized map from an (m, n) array of points to (m,) values.
    bound : float
        A finite upper bound for ``sup |fn|`` over all of R^n.
    lo, hi : float, optional
        A (possibly loose) enclosure of the value range; defaults to
        [-bound, bound].  A tight range sharpens nonlocal tail estimates
        (a constant closure has zero oscillation, hence zero tail error).
    """

    kind: str
    params: dict
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    bound: float
    lo: float = None  # type: ignore[assignment]
    hi: float = None  # type: ignore[assignment]

    def __post_init__(self):
        lo = -self.bound if self.lo is None else self.lo
        hi = self.bound if self.hi is None else self.hi
        if lo > hi:
            raise ValidationError("closure range must satisfy lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.fn(np.atleast_2d(np.asarray(points, dtype=float)))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    def shifted(self, offset: float) -> "Closure":
        """Same closure plus a constant offset (useful for comparison tests)."""
        params = dict(self.params)
        params["shift"] = params.get("shift", 0.0) + float(offset)
        return make_closure({"kind": self.kind, "params": params})


def _with_shift(fn, shift):
    if shift == 0.0:
        return fn
    return lambda pts: fn(pts) + shift


def _build_constant(params):
    value = float(params.get("value", 0.0))
    return (lambda pts: np.full(np.atleast_2d(pts).shape[0], value)), value, value


def _build_cosine(params):
    amplitude = float(params.get("amplitude", 1.0))
    wavevector = np.atleast_1d(np.asarray(params.get("wavevector", [1.0]), dtype=float))
    phase = float(params.get("phase", 0.0))

    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return amplitude * np.cos(pts @ wavevector + phase)

    return fn, -abs(amplitude), abs(amplitude)


def _build_hat(params):
    # height * max(0, 1 - |x| / width): supported on the ball of radius `width`.
    width = float(params.get("width", 1.0))
    height = float(params.get("height", 1.0))
    if width <= 0:
        raise ValidationError("hat closure needs width > 0")

    def fn(pts):
        return height * np.maximum(0.0, 1.0 - _radii(pts) / width)

    return fn, min(0.0, height), max(0.0, height)


def _build_parabolic_cap(params):
    # height * max(0, 1 - (|x| / width)^2)
    width = float(params.get("width", 1.0))
    height = float(params.get("height", 1.0))
    if width <= 0:
        raise ValidationError("parabolic_cap closure needs width > 0")

    def fn(pts):
        r = _radii(pts) / width
        return height * np.maximum(0.0, 1.0 - r * r)

    return fn, min(0.0, height), max(0.0, height)


def _build_gaussian(params):
    amplitude = float(params.get("amplitude", 1.0))
    width = float(params.get("width", 1.0))
    if width <= 0:
        raise ValidationError("gaussian closure needs width > 0")

    def fn(pts):
        r = _radii(pts) / width
        return amplitude * np.exp(-r * r)

    return fn, min(0.0, amplitude), max(0.0, amplitude)


def _build_quadratic_bump(params):
    # |x|^2 * eta(|x| / width): compactly supported, C^2, vanishing second
    # difference profile outside the support.  eta is the shared quintic step.
    from .kernels import smoothstep

    width = float(params.get("width", 1.0))
    scale = float(params.get("scale", 1.0))
    if width <= 0:
        raise ValidationError("quadratic_bump closure needs width > 0")

    def fn(pts):
        r = _radii(pts)
        return scale * r * r * smoothstep(r / width)

    rr = np.linspace(0.0, width, 20001)
    peak = float(np.max(np.abs(scale) * rr * rr * smoothstep(rr / width)))
    return fn, min(0.0, np.sign(scale) * peak), max(0.0, np.sign(scale) * peak)


def _build_bumps(params):
    # Sum of radial quintic bumps height_i * eta(|x - center_i| / width_i);
    # the workhorse for asymmetric exterior data.
    from .kernels import smoothstep

    bumps = params.get("bumps", [])
    if not bumps:
        raise ValidationError("bumps closure needs a nonempty 'bumps' list")
    spec = []
    for b in bumps:
        center = np.atleast_1d(np.asarray(b["center"], dtype=float))
        width = float(b.get("width", 1.0))
        height = float(b.get("height", 1.0))
        if width <= 0:
            raise ValidationError("bump widths must be positive")
        spec.append((center, width, height))

    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(pts.shape[0])
        for center, width, height in spec:
            d = np.sqrt(np.sum((pts - center[None, :]) ** 2, axis=1))
            out += height * smoothstep(d / width)
        return out

    lo = float(sum(min(0.0, hgt) for _, _, hgt in spec))
    hi = float(sum(max(0.0, hgt) for _, _, hgt in spec))
    return fn, lo, hi


def _build_annular_bump(params):
    # height * eta(2 | |x| - center | / width): a ring-shaped bump, handy for
    # exterior data supported strictly outside the unit ball.
    from .kernels import smoothstep

    center = float(params.get("center", 1.5))
    width = float(params.get("width", 1.0))
    height = float(params.get("height", 1.0))
    if width <= 0:
        raise ValidationError("annular_bump closure needs width > 0")

    def fn(pts):
        r = _radii(pts)
        return height * smoothstep(2.0 * np.abs(r - center) / width)

    return fn, min(0.0, height), max(0.0, height)


_REGISTRY = {
    "constant": _build_constant,
    "cosine": _build_cosine,
    "hat": _build_hat,
    "parabolic_cap": _build_parabolic_cap,
    "gaussian": _build_gaussian,
    "quadratic_bump": _build_quadratic_bump,
    "annular_bump": _build_annular_bump,
    "bumps": _build_bumps,
}


def closure_kinds() -> tuple:
    return tuple(sorted(_REGISTRY))


def make_closure(descriptor: dict) -> Closure:
    """Build a closure from a ``{"kind": ..., "params": {...}}`` descriptor."""
    if not isinstance(descriptor, dict) or "kind" not in descriptor:
        raise ValidationError("closure descriptor must be a dict with a 'kind' key")
    kind = descriptor["kind"]
    params = dict(descriptor.get("params", {}))
    if kind not in _REGISTRY:
        raise ValidationError(
            f"unknown closure kind {kind!r}; known kinds: {', '.join(closure_kinds())}"
        )
    shift = float(params.get("shift", 0.0))
    fn, lo, hi = _REGISTRY[kind](params)
    fn = _with_shift(fn, shift)
    lo, hi = lo + shift, hi + shift
    return Closure(kind=kind, params=params, fn=fn, bound=max(abs(lo), abs(hi)), lo=lo, hi=hi)


def constant(value: float = 0.0) -> Closure:
    return make_closure({"kind": "constant", "params": {"value": value}})


def cosine(amplitude: float = 1.0, wavevector=(1.0,), phase: float = 0.0) -> Closure:
    return make_closure(
        {
            "kind": "cosine",
            "params": {
                "amplitude": amplitude,
                "wavevector": list(np.atleast_1d(wavevector).astype(float)),
                "phase": phase,
            },
        }
    )


def hat(width: float = 1.0, height: float = 1.0) -> Closure:
    return make_closure({"kind": "hat", "params": {"width": width, "height": height}})
