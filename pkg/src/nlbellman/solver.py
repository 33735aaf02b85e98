"""Exterior Dirichlet solver for the concave Bellman equation.

The problem is inf_a L_a u + b_a = 0 on the open unit ball with u prescribed
on the *entire* complement (nonlocal operators see all of R^n).  Each linear
operator is discretized into an affine stencil whose off-diagonal weights are
nonnegative by construction (power-law cell masses times amplitudes times
multilinear interpolation weights), so the scheme is monotone and inherits
the discrete comparison principle.  The nonlinear equation is then solved by
Howard iteration: freeze the pointwise control, solve the linear system
directly, re-optimize the control, repeat.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sparse

from .closures import Closure, constant
from .errors import ConfigurationError, MonotonicityError, NonconvergenceError, ValidationError
from .fields import ScalarField
from .kernels import regularize_kernel
from .quadrature import QuadratureScheme, amplitudes, field_plan


@dataclass(frozen=True, eq=False)
class BellmanProblem:
    """A finite control family {K_a}, offsets {b_a}, and exterior data g.

    The domain is always the unit ball; ``h`` and ``box_radius`` fix the
    lattice the solution lives on.  All kernels must share order and
    dimension.
    """

    kernels: tuple
    exterior: Closure
    h: float
    offsets: tuple = None  # type: ignore[assignment]
    box_radius: float = 2.0
    domain_radius: float = 1.0

    def __post_init__(self):
        kernels = tuple(self.kernels)
        if not kernels:
            raise ConfigurationError("kernel family must be nonempty (field: kernels)")
        object.__setattr__(self, "kernels", kernels)
        sigma0, n0 = kernels[0].sigma, kernels[0].dimension
        for k in kernels[1:]:
            if k.sigma != sigma0 or k.dimension != n0:
                raise ValidationError("all kernels must share sigma and dimension")
        offsets = self.offsets if self.offsets is not None else (0.0,) * len(kernels)
        offsets = tuple(float(b) for b in offsets)
        if len(offsets) != len(kernels):
            raise ValidationError("offsets must match the kernel family in length")
        if not all(np.isfinite(offsets)):
            raise ValidationError("offsets must be finite")
        object.__setattr__(self, "offsets", offsets)
        if self.domain_radius != 1.0:
            raise ValidationError("the domain is fixed to the unit ball")
        if self.h <= 0 or self.box_radius < 2.0:
            raise ValidationError("need h > 0 and box_radius >= 2")

    @property
    def sigma(self) -> float:
        return self.kernels[0].sigma

    @property
    def dimension(self) -> int:
        return self.kernels[0].dimension

    @property
    def family_lam(self) -> float:
        return min(k.lam for k in self.kernels)

    @property
    def family_Lam(self) -> float:
        return max(k.Lam for k in self.kernels)


@dataclass(frozen=True)
class ControlField:
    """Per-interior-node control index (the Howard iteration state)."""

    indices: np.ndarray
    n_controls: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or np.any(idx < 0) or np.any(idx >= self.n_controls):
            raise ValidationError("control indices out of range")
        object.__setattr__(self, "indices", idx)


@dataclass(frozen=True, eq=False)
class Solution:
    """Solved field with residual bookkeeping.

    ``field`` equals the exterior data exactly at every non-interior node;
    ``max_principle_constant`` is the sup of the solve of L w = -1 under the
    final policy (the discrete constant in the boundedness estimate).
    """

    field: ScalarField
    residual_sup: float
    iterations: int
    policy: ControlField
    residual_history: tuple
    max_principle_constant: float


class StencilSet:
    """Affine stencils for every kernel of a problem on its lattice.

    For kernel ``a`` and interior node i, the value L_a u(x_i) is
    ``(A[a] @ u_int + B[a] @ u_known + closure part)[i]``, where ``u_int``
    are interior node values, ``u_known`` the remaining grid nodes, and the
    closure part gathers quadrature endpoints that leave the box.  Applied to
    the problem's own exterior data this collapses to ``A[a] @ u + const[a]``.
    """

    def __init__(self, problem: BellmanProblem, scheme: QuadratureScheme):
        self.problem = problem
        self.scheme = scheme
        n = problem.dimension
        g = _grid_field(problem)
        self.grid = g
        pts = g.grid_points()
        r = np.sqrt(np.sum(pts * pts, axis=1))
        self.interior_flat = np.flatnonzero(r < problem.domain_radius - 1e-12)
        self.known_flat = np.flatnonzero(r >= problem.domain_radius - 1e-12)
        self.n_interior = len(self.interior_flat)
        self.interior_points = pts[self.interior_flat]
        self.known_points = pts[self.known_flat]

        plan = field_plan(problem.sigma, scheme, problem.h, n)
        self.plan = plan
        amps = [np.asarray(amplitudes(k, plan)) for k in problem.kernels]

        int_of_flat = np.full(len(pts), -1, dtype=np.int64)
        int_of_flat[self.interior_flat] = np.arange(self.n_interior)
        known_of_flat = np.full(len(pts), -1, dtype=np.int64)
        known_of_flat[self.known_flat] = np.arange(len(self.known_flat))

        m = g.nodes_per_axis
        R, h = problem.box_radius, problem.h
        NI = self.n_interior
        rows = np.arange(NI)

        self.A = [np.zeros((NI, NI)) for _ in problem.kernels]
        B_coo = [([], [], []) for _ in problem.kernels]
        out_rows: list = []
        out_pos: list = []
        out_w: list = [[] for _ in problem.kernels]

        tol = 1e-12 * R
        for k_atom in range(plan.size):
            y = plan.displacements[k_atom]
            w_base = plan.weights[k_atom]
            cs = [w_base * a[k_atom] for a in amps]
            for sign in (1.0, -1.0):
                P = self.interior_points + sign * y
                inside = np.max(np.abs(P), axis=1) <= R + tol
                if np.any(inside):
                    rel = (P[inside] + R) / h
                    cell = np.clip(np.floor(rel).astype(np.int64), 0, m - 2)
                    t = np.clip(rel - cell, 0.0, 1.0)
                    rsub = rows[inside]
                    for corner, wgt in _corners(n, cell, t, m):
                        iidx = int_of_flat[corner]
                        is_int = iidx >= 0
                        if np.any(is_int):
                            for a, c in enumerate(cs):
                                self.A[a][rsub[is_int], iidx[is_int]] += c * wgt[is_int]
                        if np.any(~is_int):
                            kidx = known_of_flat[corner[~is_int]]
                            for a, c in enumerate(cs):
                                br, bc, bv = B_coo[a]
                                br.append(rsub[~is_int])
                                bc.append(kidx)
                                bv.append(c * wgt[~is_int])
                if not np.all(inside):
                    out_rows.append(rows[~inside])
                    out_pos.append(P[~inside])
                    for a, c in enumerate(cs):
                        out_w[a].append(np.full(np.count_nonzero(~inside), c))
            for a, c in enumerate(cs):
                self.A[a][rows, rows] -= 2.0 * c

        nk = len(self.known_flat)
        self.B = []
        for br, bc, bv in B_coo:
            if br:
                coo = sparse.coo_matrix(
                    (np.concatenate(bv), (np.concatenate(br), np.concatenate(bc))),
                    shape=(NI, nk),
                )
                self.B.append(coo.tocsr())
            else:
                self.B.append(sparse.csr_matrix((NI, nk)))
        self.out_rows = np.concatenate(out_rows) if out_rows else np.zeros(0, dtype=np.int64)
        self.out_positions = np.vstack(out_pos) if out_pos else np.zeros((0, n))
        self.out_weights = [np.concatenate(w) if w else np.zeros(0) for w in out_w]

        for a, A in enumerate(self.A):
            off = A.copy()
            np.fill_diagonal(off, 0.0)
            if off.min() < 0:
                raise MonotonicityError(
                    f"kernel {a}: negative off-diagonal stencil weight {off.min()}; "
                    "the scheme would lose the comparison principle"
                )

        # constants baked against the problem's own exterior data
        g_known = problem.exterior(self.known_points)
        g_out = problem.exterior(self.out_positions)
        self.const = [
            self.B[a] @ g_known + _scatter(self.out_rows, self.out_weights[a] * g_out, NI)
            for a in range(len(problem.kernels))
        ]

    # -- application --------------------------------------------------------

    def apply_per_kernel(self, fld: ScalarField) -> np.ndarray:
        """L_a applied to an arbitrary field, shape (n_kernels, n_interior)."""
        if fld.values.shape != self.grid.values.shape or fld.h != self.problem.h:
            raise ValidationError("field does not live on the problem's lattice")
        u_int = fld.values.ravel()[self.interior_flat]
        u_known = fld.values.ravel()[self.known_flat]
        closure_vals = fld.exterior(self.out_positions) if len(self.out_positions) else np.zeros(0)
        out = []
        for a in range(len(self.problem.kernels)):
            v = self.A[a] @ u_int + self.B[a] @ u_known
            v += _scatter(self.out_rows, self.out_weights[a] * closure_vals, self.n_interior)
            out.append(v + self.problem.offsets[a])
        return np.vstack(out)

    def linear_values(self, a: int, u_int: np.ndarray) -> np.ndarray:
        return self.A[a] @ u_int + self.const[a] + self.problem.offsets[a]

    def bellman_values(self, u_int: np.ndarray) -> np.ndarray:
        per = [self.linear_values(a, u_int) for a in range(len(self.problem.kernels))]
        return np.vstack(per)

    def policy_rows(self, policy: np.ndarray):
        NI = self.n_interior
        A = np.empty((NI, NI))
        c = np.empty(NI)
        for a in range(len(self.problem.kernels)):
            mask = policy == a
            if np.any(mask):
                A[mask] = self.A[a][mask]
                c[mask] = self.const[a][mask] + self.problem.offsets[a]
        return A, c

    def solution_field(self, u_int: np.ndarray) -> ScalarField:
        vals = self.grid.values.ravel().copy()
        vals[self.interior_flat] = u_int
        return ScalarField(
            dimension=self.problem.dimension,
            h=self.problem.h,
            box_radius=self.problem.box_radius,
            values=vals.reshape(self.grid.values.shape),
            exterior=self.problem.exterior,
        )


def _corners(n, cell, t, m):
    """Multilinear corner indices (flat) and weights for given cells."""
    if n == 1:
        c = cell[:, 0]
        yield c, (1.0 - t[:, 0])
        yield c + 1, t[:, 0]
        return
    cx, cy = cell[:, 0], cell[:, 1]
    tx, ty = t[:, 0], t[:, 1]
    yield cx * m + cy, (1 - tx) * (1 - ty)
    yield (cx + 1) * m + cy, tx * (1 - ty)
    yield cx * m + (cy + 1), (1 - tx) * ty
    yield (cx + 1) * m + (cy + 1), tx * ty


def _scatter(rows, vals, size):
    if len(rows) == 0:
        return np.zeros(size)
    return np.bincount(rows, weights=vals, minlength=size)


def _grid_field(problem: BellmanProblem) -> ScalarField:
    """Grid skeleton carrying the exterior data at every node."""
    from .fields import from_closure

    return from_closure(problem.exterior, problem.dimension, problem.h, problem.box_radius)


def discretize(problem: BellmanProblem, scheme: QuadratureScheme) -> StencilSet:
    """Assemble per-kernel affine stencils; aborts on any negative weight."""
    return StencilSet(problem, scheme)


def policy_improvement(stencils: StencilSet, u: ScalarField | np.ndarray) -> ControlField:
    """Pointwise argmin of (stencil_a . u + b_a), least index on ties."""
    if isinstance(u, ScalarField):
        values = stencils.apply_per_kernel(u)
    else:
        values = stencils.bellman_values(np.asarray(u, dtype=float))
    return ControlField(np.argmin(values, axis=0), len(stencils.problem.kernels))


def solve_dirichlet(problem: BellmanProblem, scheme: QuadratureScheme,
                    tol: float = 1e-8, max_iter: int = 50,
                    stencils: StencilSet | None = None) -> Solution:
    """Howard iteration for inf_a L_a u + b_a = 0 in B_1, u = g outside.

    Starts from the pure first-kernel policy, alternates direct linear solves
    with pointwise policy improvement, and stops once the Bellman residual
    drops below ``tol`` or the policy is stationary.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    st = stencils if stencils is not None else discretize(problem, scheme)
    NI = st.n_interior
    policy = np.zeros(NI, dtype=np.int64)
    history = []
    u_int = np.zeros(NI)
    for iteration in range(1, max_iter + 1):
        A, c = st.policy_rows(policy)
        try:
            u_int = np.linalg.solve(A, -c)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError(
                "singular policy system; monotone rows should forbid this (bug signal)"
            ) from exc
        values = st.bellman_values(u_int)
        residual = values.min(axis=0)
        res_sup = float(np.max(np.abs(residual))) if NI else 0.0
        history.append(res_sup)
        new_policy = np.argmin(values, axis=0)
        stationary = bool(np.array_equal(new_policy, policy))
        policy = new_policy
        if res_sup <= tol:
            Af, _ = st.policy_rows(policy)
            w = np.linalg.solve(Af, -np.ones(NI))
            return Solution(
                field=st.solution_field(u_int),
                residual_sup=res_sup,
                iterations=iteration,
                policy=ControlField(policy, len(problem.kernels)),
                residual_history=tuple(history),
                max_principle_constant=float(np.max(np.abs(w))),
            )
        if stationary:
            # A stationary policy solves its own linear system, so the
            # residual is already at linear-solver precision.
            raise NonconvergenceError(
                f"policy is stationary but the residual {res_sup} exceeds tol={tol}; "
                "the tolerance is below the linear solver's precision",
                residual_history=history,
            )
    raise NonconvergenceError(
        f"policy iteration did not reach tol={tol} within {max_iter} iterations",
        residual_history=history,
    )


def residual(problem: BellmanProblem, u: ScalarField, scheme: QuadratureScheme,
             stencils: StencilSet | None = None) -> ScalarField:
    """Field of min_a (stencil_a . u + b_a) at interior nodes, 0 elsewhere.

    Uses the field's own grid and exterior values, so shifting a field and
    its closure by one global constant leaves the residual unchanged.
    """
    st = stencils if stencils is not None else discretize(problem, scheme)
    res = st.apply_per_kernel(u).min(axis=0)
    vals = np.zeros(u.values.size)
    vals[st.interior_flat] = res
    return ScalarField(
        dimension=u.dimension,
        h=u.h,
        box_radius=u.box_radius,
        values=vals.reshape(u.values.shape),
        exterior=constant(0.0),
    )


def solve_regularized_sequence(problem: BellmanProblem, scheme: QuadratureScheme,
                               tol: float, eps_list, max_iter: int = 50):
    """Solve with kernels blended to the family floor inside B_eps, per eps.

    Returns a list of (eps, Solution, sup distance to the last solution);
    the final entry's distance is zero by definition.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValidationError("eps_list must be strictly decreasing")
    if eps_list[-1] < 2.0 * problem.h * (1.0 - 1e-12):
        raise ValidationError("the smallest eps must be at least 2h")
    lam = problem.family_lam
    solutions = []
    for eps in eps_list:
        reg = replace(
            problem,
            kernels=tuple(regularize_kernel(k, eps, lam) for k in problem.kernels),
        )
        solutions.append(solve_dirichlet(reg, scheme, tol=tol, max_iter=max_iter))
    last = solutions[-1].field.values
    out = []
    for eps, sol in zip(eps_list, solutions):
        dist = float(np.max(np.abs(sol.field.values - last)))
        out.append((eps, sol, dist))
    return out
