"""Grid functions with analytic exterior closures.

A ScalarField stores values on a uniform lattice covering the box [-R, R]^n
and delegates everything outside the box to a bounded analytic closure.
Evaluation anywhere in R^n is therefore well defined, which is what the
nonlocal operators need.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .closures import Closure, constant
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Bounded function on R^n: lattice values inside, closure outside.

    Parameters
    ----------
    dimension : int
        1 or 2.
    h : float
        Lattice spacing; 2R/h must be an even integer so 0 and +-R are nodes.
    box_radius : float
        Half-width R of the box; must be >= 2 so B_1 sits inside with margin.
    values : ndarray
        Node values, shape (m,) in 1D or (m, m) row-major in 2D with
        m = 2R/h + 1; index i corresponds to coordinate -R + i h (first
        axis is x in 2D).
    exterior : Closure
        Analytic values for |x|_inf > R.
    sup_norm : float
        Cached bound for sup over all of R^n; at least the grid max and the
        closure bound.
    """

    dimension: int
    h: float
    box_radius: float
    values: np.ndarray = field(repr=False)
    exterior: Closure
    sup_norm: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValidationError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.h <= 0:
            raise ValidationError("grid spacing must be positive")
        if self.box_radius < 2.0:
            raise ValidationError("box radius must be at least 2 (B_1 with margin)")
        m = 2.0 * self.box_radius / self.h
        if abs(m - round(m)) > 1e-9 or int(round(m)) % 2 != 0:
            raise ValidationError("2 * box_radius / h must be an even integer")
        vals = np.asarray(self.values, dtype=float)
        expect = int(round(m)) + 1
        shape = (expect,) * self.dimension
        if vals.shape != shape:
            raise ValidationError(f"values shape {vals.shape} does not match grid shape {shape}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("field values must be finite")
        object.__setattr__(self, "values", vals)
        floor = max(float(np.max(np.abs(vals))) if vals.size else 0.0, self.exterior.bound)
        if self.sup_norm is None:
            object.__setattr__(self, "sup_norm", floor)
        elif self.sup_norm < floor * (1.0 - 1e-12):
            raise ValidationError("sup_norm is below the grid/exterior bound")

    # -- grid geometry ------------------------------------------------------

    @property
    def oscillation(self) -> float:
        """Upper bound for sup u - inf u over all of R^n."""
        return max(float(np.max(self.values)), self.exterior.hi) - \
            min(float(np.min(self.values)), self.exterior.lo)

    @property
    def nodes_per_axis(self) -> int:
        return self.values.shape[0]

    def axis_coords(self) -> np.ndarray:
        return -self.box_radius + self.h * np.arange(self.nodes_per_axis)

    def grid_points(self) -> np.ndarray:
        """All node coordinates, shape (N, n), row-major."""
        ax = self.axis_coords()
        if self.dimension == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def interior_node_indices(self, radius: float = 1.0) -> np.ndarray:
        """Flat indices of nodes strictly inside the ball of given radius."""
        pts = self.grid_points()
        r = np.sqrt(np.sum(pts * pts, axis=1))
        return np.flatnonzero(r < radius - 1e-12)

    # -- evaluation ---------------------------------------------------------

    def values_at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at arbitrary points: multilinear interpolation inside the
        box, closure outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dimension:
            raise ValidationError(f"points must have shape (m, {self.dimension})")
        out = np.empty(pts.shape[0])
        tol = 1e-12 * self.box_radius
        inside = np.max(np.abs(pts), axis=1) <= self.box_radius + tol
        if np.any(inside):
            out[inside] = self._interpolate(pts[inside])
        if not np.all(inside):
            out[~inside] = self.exterior(pts[~inside])
        return out

    def __call__(self, point) -> float:
        return float(self.values_at(np.atleast_2d(point))[0])

    def _interpolate(self, pts: np.ndarray) -> np.ndarray:
        m = self.nodes_per_axis
        rel = (pts + self.box_radius) / self.h
        cell = np.clip(np.floor(rel).astype(np.int64), 0, m - 2)
        t = np.clip(rel - cell, 0.0, 1.0)
        if self.dimension == 1:
            c = cell[:, 0]
            w = t[:, 0]
            return (1.0 - w) * self.values[c] + w * self.values[c + 1]
        cx, cy = cell[:, 0], cell[:, 1]
        tx, ty = t[:, 0], t[:, 1]
        v = self.values
        return (
            (1 - tx) * (1 - ty) * v[cx, cy]
            + tx * (1 - ty) * v[cx + 1, cy]
            + (1 - tx) * ty * v[cx, cy + 1]
            + tx * ty * v[cx + 1, cy + 1]
        )

    # -- derived fields -----------------------------------------------------

    def with_values(self, values: np.ndarray, sup_norm: float | None = None) -> "ScalarField":
        return replace(self, values=np.asarray(values, dtype=float), sup_norm=sup_norm)

    def shifted(self, offset: float) -> "ScalarField":
        """Field plus a global constant (grid values and closure together)."""
        return ScalarField(
            dimension=self.dimension,
            h=self.h,
            box_radius=self.box_radius,
            values=self.values + offset,
            exterior=self.exterior.shifted(offset),
        )


def second_difference(u: ScalarField, x, y) -> float:
    """delta u(x, y) = u(x+y) + u(x-y) - 2 u(x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    vals = u.values_at(np.vstack([x + y, x - y, x]))
    return float(vals[0] + vals[1] - 2.0 * vals[2])


def from_function(fn, dimension: int, h: float, box_radius: float, exterior: Closure) -> ScalarField:
    """Sample a callable on the grid and attach the given exterior closure."""
    ax = -box_radius + h * np.arange(int(round(2 * box_radius / h)) + 1)
    if dimension == 1:
        vals = np.asarray(fn(ax[:, None]), dtype=float)
    else:
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        vals = np.asarray(fn(pts), dtype=float).reshape(X.shape)
    return ScalarField(dimension, h, box_radius, vals, exterior)


def from_closure(closure: Closure, dimension: int, h: float, box_radius: float) -> ScalarField:
    """Field whose grid values and exterior both come from one formula."""
    return from_function(closure.fn, dimension, h, box_radius, closure)


def zero_field(dimension: int, h: float, box_radius: float) -> ScalarField:
    return from_closure(constant(0.0), dimension, h, box_radius)


def average(u: ScalarField, v: ScalarField) -> ScalarField:
    """Pointwise average (u + v) / 2, closures included."""
    if (u.dimension, u.h, u.box_radius) != (v.dimension, v.h, v.box_radius):
        raise ValidationError("fields must share grid geometry to average")
    gu, gv = u.exterior, v.exterior
    mixed = Closure(
        kind="average",
        params={},
        fn=lambda pts: 0.5 * (gu.fn(pts) + gv.fn(pts)),
        bound=0.5 * (gu.bound + gv.bound),
        lo=0.5 * (gu.lo + gv.lo),
        hi=0.5 * (gu.hi + gv.hi),
    )
    return ScalarField(
        dimension=u.dimension,
        h=u.h,
        box_radius=u.box_radius,
        values=(u.values + v.values) / 2.0,
        exterior=mixed,
    )


def translated_closure(base: Closure, shift_vector) -> Closure:
    """Closure x -> base(x - s); used by the discrete-modulus diagnostics."""
    s = np.atleast_1d(np.asarray(shift_vector, dtype=float))
    return Closure(
        kind="translated",
        params={"shift_vector": s.tolist(), "base": base.descriptor()},
        fn=lambda pts: base.fn(np.atleast_2d(pts) - s[None, :]),
        bound=base.bound,
        lo=base.lo,
        hi=base.hi,
    )
