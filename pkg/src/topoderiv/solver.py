"""Finite-difference Poisson solver and the corrector cascade.

The discrete operator is assembled edge-wise: for the grid edge (i, j) along
axis a the conductance is (product of transverse trapezoid weights) / h_a,
giving a symmetric positive definite system identical to the 5/7-point scheme
with second-order ghost-node Neumann closure, scaled by nodal dual volumes.
Dirichlet rows are eliminated; the reduced system is solved by Jacobi
preconditioned conjugate gradients to relative residual 1e-10.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import GridSpec, ScalarField, char_fraction, zero_field
from .kernels import leading_AB, log_constant_b, multipole_R, multipole_S
from .moments import DataJet, compute_moments
from .poly import Poly
from .potentials import PotentialEvaluator

CG_RTOL = 1e-10


# ---------------------------------------------------------------------------
# operator assembly


@functools.lru_cache(maxsize=16)
def operator(grid):
    """Full symmetric operator over all nodes (dual-volume scaled Laplacian)."""
    shape = grid.shape
    d = grid.dim
    w1d = [grid.trapezoid_weights_1d(a) for a in range(d)]
    N = int(np.prod(shape))
    lin = np.arange(N).reshape(shape)
    rows, cols, vals = [], [], []
    for a in range(d):
        sl_lo = [slice(None)] * d
        sl_hi = [slice(None)] * d
        sl_lo[a] = slice(None, -1)
        sl_hi[a] = slice(1, None)
        i = lin[tuple(sl_lo)].ravel()
        j = lin[tuple(sl_hi)].ravel()
        edge_shape = list(shape)
        edge_shape[a] -= 1
        c = np.ones(edge_shape)
        for b in range(d):
            if b == a:
                continue
            rs = [1] * d
            rs[b] = shape[b]
            c = c * w1d[b].reshape(rs)
        c = (c / grid.h[a]).ravel()
        rows.extend([i, j, i, j])
        cols.extend([i, j, j, i])
        vals.extend([c, c, -c, -c])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N)).tocsr()
    A.sum_duplicates()
    return A


def _face_surface_weights(grid, axis):
    """Surface trapezoid weights on a face normal to `axis` (transverse shape)."""
    w = None
    for b in range(grid.dim):
        if b == axis:
            continue
        wb = grid.trapezoid_weights_1d(b)
        w = wb if w is None else np.multiply.outer(w, wb)
    return w


# ---------------------------------------------------------------------------
# problems


@dataclass
class PoissonProblem:
    grid: GridSpec
    source: ScalarField | None = None
    dirichlet: object = 0.0          # scalar or callable(points) -> values
    neumann: object = 0.0            # scalar or callable(points, normal) -> values
    rhs_extra: np.ndarray | None = None   # full-node load vector added verbatim

    def dirichlet_values(self, pts):
        if callable(self.dirichlet):
            return np.asarray(self.dirichlet(pts), dtype=float)
        return np.full(pts.shape[:-1], float(self.dirichlet))

    def neumann_values(self, pts, normal):
        if callable(self.neumann):
            try:
                return np.asarray(self.neumann(pts, normal), dtype=float)
            except TypeError:
                return np.asarray(self.neumann(pts), dtype=float)
        return np.full(pts.shape[:-1], float(self.neumann))


def _assemble_rhs(problem):
    grid = problem.grid
    b = np.zeros(grid.shape)
    if problem.source is not None:
        if not np.all(np.isfinite(problem.source.values)):
            raise ValueError("source contains non-finite values")
        b += grid.node_volumes() * problem.source.values
    coords = grid.coords()
    for axis in range(grid.dim):
        for side in (0, 1):
            if (axis, side) in grid.dirichlet_faces:
                continue
            sl = grid.face_slices(axis, side)
            normal = np.zeros(grid.dim)
            normal[axis] = -1.0 if side == 0 else 1.0
            g = problem.neumann_values(coords[sl], normal)
            b[sl] += _face_surface_weights(grid, axis) * g
    if problem.rhs_extra is not None:
        b += problem.rhs_extra.reshape(grid.shape)
    return b.ravel()


def solve(problem):
    """Solve the mixed Dirichlet/Neumann Poisson problem."""
    grid = problem.grid
    A = operator(grid)
    b = _assemble_rhs(problem)
    mask = grid.dirichlet_mask().ravel()
    coords = grid.coords().reshape(-1, grid.dim)
    x = np.zeros(b.size)
    x[mask] = problem.dirichlet_values(coords[mask])
    free = np.nonzero(~mask)[0]
    fixed = np.nonzero(mask)[0]
    rhs = b[free] - A[free][:, fixed] @ x[fixed]
    A_ff = A[free][:, free].tocsr()
    diag = A_ff.diagonal()
    M = sp.diags(1.0 / diag)
    maxiter = int(200 * math.sqrt(free.size)) + 100
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        sol = np.zeros(free.size)
        info = 0
    else:
        try:
            sol, info = spla.cg(A_ff, rhs, rtol=CG_RTOL, atol=0.0,
                                maxiter=maxiter, M=M)
        except TypeError:  # older scipy spelling
            sol, info = spla.cg(A_ff, rhs, tol=CG_RTOL, atol=0.0,
                                maxiter=maxiter, M=M)
    if info != 0:
        raise RuntimeError(f"conjugate gradients failed to converge (info={info})")
    x[free] = sol
    return ScalarField(grid, x.reshape(grid.shape))


# ---------------------------------------------------------------------------
# far-field boundary data


class FarFieldTrace:
    """sum_i c_i * term_i(y) * (ln|y| if flagged); value and outward flux."""

    def __init__(self, parts):
        self.parts = [(c, t, bool(lg)) for c, t, lg in parts
                      if c != 0.0 and not t.is_zero()]

    def is_zero(self):
        return not self.parts

    def value(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape[:-1])
        if not self.parts:
            return out
        r = np.linalg.norm(y, axis=-1)
        for c, t, lg in self.parts:
            v = c * t(y)
            if lg:
                v = v * np.log(r)
            out = out + v
        return out

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape)
        if not self.parts:
            return out
        r = np.linalg.norm(y, axis=-1)
        for c, t, lg in self.parts:
            g = c * t.gradient(y)
            if lg:
                g = np.log(r)[..., None] * g \
                    + (c * t(y) / (r * r))[..., None] * y
            out = out + g
        return out


def solve_trace_corrector(grid, x0, trace):
    """Corrector with Dirichlet trace(x-x0) on Gamma, matching flux on Sigma."""
    if trace.is_zero():
        return zero_field(grid)
    x0 = np.asarray(x0, dtype=float)
    problem = PoissonProblem(
        grid,
        dirichlet=lambda pts: trace.value(pts - x0),
        neumann=lambda pts, nrm: trace.gradient(pts - x0) @ nrm,
    )
    return solve(problem)


# ---------------------------------------------------------------------------
# corrector cascade


@dataclass
class CorrectorSet:
    dim: int
    cost_kind: str
    max_k: int
    fields: dict = field(default_factory=dict)   # (name, k) -> ScalarField

    def get(self, name, k):
        if k < 1:
            raise ValueError("corrector order k >= 1 required")
        return self.fields[(name, k)]


class Workspace:
    """One problem configuration: grid, inclusion, polynomial data, weights."""

    def __init__(self, grid, x0, shape, f1, f2, u_star=None,
                 alpha1=1.0, alpha2=1.0, n_max=8, quad_order=10):
        if grid.dim != shape.dim:
            raise ValueError("grid/shape dimension mismatch")
        self.grid = grid
        self.d = grid.dim
        self.x0 = np.asarray(x0, dtype=float)
        self.shape = shape
        self.f1 = f1
        self.f2 = f2
        self.u_star = u_star if u_star is not None else Poly.zero(self.d)
        self.alpha1 = float(alpha1)
        self.alpha2 = float(alpha2)
        self._validate_x0()
        self.moments = compute_moments(shape, n_max)
        self.jet = DataJet(self.d, f1, f2, self.u_star, self.x0, order=n_max)
        self.potential = PotentialEvaluator(shape, self.jet,
                                            alpha1=self.alpha1, q=quad_order)
        self._cache = {}

    def _validate_x0(self):
        g = self.grid
        diam = math.sqrt(sum((hi - lo) ** 2 for lo, hi in zip(g.lo, g.hi)))
        for a in range(self.d):
            margin = min(self.x0[a] - g.lo[a], g.hi[a] - self.x0[a])
            if margin < 5 * g.h[a]:
                raise ValueError("x0 must be at least 5 grid cells from the boundary")
            if margin < 0.2 * diam:
                raise ValueError("x0 must be at least 0.2*diam(D) from the boundary")

    # -- state and adjoint --------------------------------------------------

    def solve_state(self, eps):
        if eps < 0:
            raise ValueError("eps must be >= 0")
        key = ("state", float(eps))
        if key in self._cache:
            return self._cache[key]
        coords = self.grid.coords()
        src = self.f2(coords)
        if eps > 0:
            frac = char_fraction(self.grid, self.x0, eps, self.shape)
            src = src + (self.f1(coords) - self.f2(coords)) * frac.values
        u = solve(PoissonProblem(self.grid, source=ScalarField(self.grid, src)))
        self._cache[key] = u
        return u

    @property
    def u0(self):
        return self.solve_state(0.0)

    def solve_adjoint_p0(self, cost_kind):
        if cost_kind not in ("L2", "H1"):
            raise ValueError("cost_kind must be 'L2' or 'H1'")
        key = ("p0", cost_kind)
        if key in self._cache:
            return self._cache[key]
        e = self.u0.values - self.u_star(self.grid.coords())
        if cost_kind == "L2":
            src = ScalarField(self.grid, -2.0 * self.alpha1 * e)
            p0 = solve(PoissonProblem(self.grid, source=src))
        else:
            if self.alpha2 == 0.0:
                p0 = zero_field(self.grid)
            else:
                rhs = -2.0 * self.alpha2 * (operator(self.grid) @ e.ravel())
                p0 = solve(PoissonProblem(self.grid, rhs_extra=rhs))
        self._cache[key] = p0
        return p0

    # -- correctors ----------------------------------------------------------

    def _solve_v(self, k):
        parts = [(-1.0, multipole_R(k - j + 1, j, self.moments, self.jet, self.d),
                  False) for j in range(1, k + 1)]
        return solve_trace_corrector(self.grid, self.x0, FarFieldTrace(parts))

    def _solve_w_L2(self, k):
        parts = [(-1.0, multipole_S(k - ell, ell, self.moments, self.jet,
                                    self.d, self.alpha1), False)
                 for ell in range(1, k + 1)]
        return solve_trace_corrector(self.grid, self.x0, FarFieldTrace(parts))

    def _solve_s(self, k):
        """s_1..s_9 (d=2) or s_1..s_3 (d=3) for source order k."""
        AB = leading_AB(k, self.moments, self.jet, self.d, self.alpha1)
        if self.d == 2:
            A2, A1, A0, B2, B1, B0 = AB
            specs = [(-1.0, A2, True), (1.0, A2, False),
                     (-1.0, A1, True), (1.0, A1, False),
                     (-1.0, A0, True), (1.0, A0, False),
                     (-1.0, B2, False), (-1.0, B1, False), (-1.0, B0, False)]
        else:
            A1, A0, Am1 = AB
            specs = [(-1.0, A1, False), (-1.0, A0, False), (-1.0, Am1, False)]
        return [solve_trace_corrector(self.grid, self.x0, FarFieldTrace([spec]))
                for spec in specs]

    def _solve_volume(self, source_values):
        if not np.any(source_values):
            return zero_field(self.grid)
        return solve(PoissonProblem(
            self.grid, source=ScalarField(self.grid, source_values)))

    def solve_correctors(self, max_k, cost_kind):
        if cost_kind not in ("L2", "H1"):
            raise ValueError("cost_kind must be 'L2' or 'H1'")
        key = ("correctors", max_k, cost_kind)
        if key in self._cache:
            return self._cache[key]
        cs = CorrectorSet(self.d, cost_kind, max_k)
        zero = zero_field(self.grid)
        for k in range(1, max_k + 1):
            v = zero if k == 1 else self._solve_v(k)
            cs.fields[("v", k)] = v
            if cost_kind == "H1":
                cs.fields[("w", k)] = ScalarField(self.grid,
                                                  -self.alpha2 * v.values)
            else:
                cs.fields[("w", k)] = zero if k <= 2 else self._solve_w_L2(k)
                cs.fields[("m", k)] = (zero if k == 1 else
                                       self._solve_volume(-self.alpha1 * v.values))
                if self.d == 2:
                    b_k = 0.0 if k == 1 else log_constant_b(k, self.moments, self.jet)
                    cs.fields[("n", k)] = self._solve_volume(
                        np.full(self.grid.shape, -self.alpha1 * b_k))
                n_s = 9 if self.d == 2 else 3
                if k >= 2:
                    s_fields = self._solve_s(k)
                else:
                    s_fields = [zero] * n_s
                for i in range(n_s):
                    cs.fields[(f"s{i + 1}", k)] = s_fields[i]
        self._cache[key] = cs
        return cs


__all__ = [
    "PoissonProblem",
    "CorrectorSet",
    "Workspace",
    "FarFieldTrace",
    "operator",
    "solve",
    "solve_trace_corrector",
]
