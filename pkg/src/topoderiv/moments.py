"""Exact monomial moments of the inclusion shape and Taylor jets of the data.

Ball moments come from the closed beta-function formula; polygon and
tetrahedral moments from exact monomial integration over simplices (affine
substitution + factorial formula). Data f1, f2, u* are polynomials, so every
jet is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .poly import Poly, monomials_up_to

ORIGIN_MARGIN = 1e-9


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class InclusionShape:
    kind: str              # "ball" | "polygon" | "tet_mesh"
    dim: int
    vertices: tuple = ()   # polygon: ((x,y), ...) CCW; tet_mesh: (((4,3) tet), ...)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.kind == "ball":
            pass
        elif self.kind == "polygon":
            if self.dim != 2:
                raise ValueError("polygon shapes are d=2")
            if len(self.vertices) < 3:
                raise ValueError("polygon needs >= 3 vertices")
        elif self.kind == "tet_mesh":
            if self.dim != 3:
                raise ValueError("tet meshes are d=3")
            if len(self.vertices) < 1:
                raise ValueError("tet mesh needs >= 1 tetrahedron")
        else:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if not self.contains_origin(margin=ORIGIN_MARGIN):
            raise ValueError("shape must strictly contain the origin")

    # point location -------------------------------------------------------

    def contains(self, points):
        """Boolean mask: point strictly inside the shape."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if self.kind == "ball":
            out = np.einsum("...i,...i->...", pts, pts) < 1.0
        elif self.kind == "polygon":
            out = _polygon_contains(np.asarray(self.vertices, dtype=float), pts)
        else:
            out = np.zeros(pts.shape[0], dtype=bool)
            for tet in self.vertices:
                out |= _tet_contains(np.asarray(tet, dtype=float), pts)
        return out[0] if single else out

    def contains_origin(self, margin=ORIGIN_MARGIN):
        o = np.zeros(self.dim)
        if self.kind == "ball":
            return True
        if self.kind == "polygon":
            verts = np.asarray(self.vertices, dtype=float)
            if not _polygon_contains(verts, o[None, :])[0]:
                return False
            return _polygon_boundary_distance(verts, o) >= margin
        for tet in self.vertices:
            lam = _barycentric(np.asarray(tet, dtype=float), o)
            if lam is not None and np.all(lam >= margin):
                return True
        return False

    @property
    def diameter_bound(self):
        """Radius of a ball around the origin containing the shape."""
        if self.kind == "ball":
            return 1.0
        verts = np.asarray(self.vertices, dtype=float).reshape(-1, self.dim)
        return float(np.max(np.linalg.norm(verts, axis=1)))


def unit_ball(dim):
    return InclusionShape("ball", dim)


def _polygon_contains(verts, pts):
    # even-odd ray casting, vectorized over pts
    n = len(verts)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        cond = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (x < np.where(cond, xint, np.inf))
    return inside


def _polygon_boundary_distance(verts, p):
    n = len(verts)
    d = np.inf
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        ab = b - a
        t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
        d = min(d, float(np.linalg.norm(p - (a + t * ab))))
    return d


def _barycentric(tet, p):
    T = np.column_stack([tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0]])
    det = np.linalg.det(T)
    if abs(det) < 1e-14:
        return None
    lam = np.linalg.solve(T, p - tet[0])
    return np.array([1.0 - lam.sum(), *lam])


def _tet_contains(tet, pts):
    T = np.column_stack([tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0]])
    if abs(np.linalg.det(T)) < 1e-14:
        raise ValueError("degenerate tetrahedron")
    lam = np.linalg.solve(T, (pts - tet[0]).T).T
    lam0 = 1.0 - lam.sum(axis=1)
    return (lam0 > 0) & np.all(lam > 0, axis=1)


# ---------------------------------------------------------------------------
# moment tables


@dataclass(frozen=True)
class MomentTable:
    dim: int
    n_max: int
    values: dict = field(default_factory=dict)  # exponent tuple -> moment

    def __getitem__(self, alpha):
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) > self.n_max:
            raise KeyError(f"moment order {sum(alpha)} exceeds table N_max={self.n_max}")
        return self.values[alpha]

    @property
    def measure(self):
        return self.values[(0,) * self.dim]


def _ball_moment(alpha):
    # int_{B1} x^alpha dx = prod Gamma((a_i+1)/2) / Gamma(1 + (|a|+d)/2), even a_i
    if any(a % 2 for a in alpha):
        return 0.0
    d = len(alpha)
    num = 1.0
    for a in alpha:
        num *= math.gamma((a + 1) / 2.0)
    return num / math.gamma(1.0 + (sum(alpha) + d) / 2.0)


def _simplex_monomial_integral(poly_in_bary, dim):
    # int over unit simplex of u^a v^b (w^c): a! b! (c!) / (a+b(+c)+dim)!
    total = 0.0
    for alpha, c in poly_in_bary.coeffs.items():
        num = 1.0
        for a in alpha:
            num *= math.factorial(a)
        total += c * num / math.factorial(sum(alpha) + dim)
    return total


def _simplex_moment(verts, alpha, dim):
    """Exact int over the simplex verts (dim+1 points) of x^alpha dx, signed."""
    v0 = np.asarray(verts[0], dtype=float)
    A = np.column_stack([np.asarray(v, dtype=float) - v0 for v in verts[1:]])
    det = float(np.linalg.det(A))
    mono = Poly.monomial(dim, alpha, 1.0)
    sub = mono.affine(A, v0)  # polynomial in the barycentric (u, v[, w])
    return det * _simplex_monomial_integral(sub, dim)


def compute_moments(shape, n_max):
    """Exact moments int_omega x^alpha dx for |alpha| <= n_max."""
    if n_max > 12:
        raise ValueError("N_max must be <= 12")
    d = shape.dim
    values = {}
    alphas = monomials_up_to(d, n_max)
    if shape.kind == "ball":
        for a in alphas:
            values[a] = _ball_moment(a)
    elif shape.kind == "polygon":
        verts = np.asarray(shape.vertices, dtype=float)
        n = len(verts)
        tris = [(verts[0], verts[i], verts[i + 1]) for i in range(1, n - 1)]
        for tri in tris:
            A = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
            if abs(np.linalg.det(A)) < 1e-14:
                raise ValueError("degenerate triangle in polygon fan")
        for a in alphas:
            values[a] = sum(_simplex_moment(tri, a, 2) for tri in tris)
    else:
        tets = [np.asarray(t, dtype=float) for t in shape.vertices]
        dets = [np.linalg.det(np.column_stack([t[1] - t[0], t[2] - t[0], t[3] - t[0]]))
                for t in tets]
        if any(abs(det) < 1e-14 for det in dets):
            raise ValueError("degenerate tetrahedron")
        # orientation-independent: per-tet |integral|-consistent signed moment
        for a in alphas:
            values[a] = 0.0
            for t, det in zip(tets, dets):
                v0 = t[0]
                A = np.column_stack([t[1] - v0, t[2] - v0, t[3] - v0])
                mono = Poly.monomial(3, a, 1.0)
                sub = mono.affine(A, v0)
                values[a] += abs(det) * _simplex_monomial_integral(sub, 3)
    if values[(0,) * d] <= 0.0:
        raise ValueError("shape has non-positive measure")
    return MomentTable(d, n_max, values)


def weighted_moment(table, poly):
    """Exact int_omega poly dx = sum coeff_alpha * M_alpha."""
    if poly.degree > table.n_max:
        raise ValueError(
            f"polynomial degree {poly.degree} exceeds moment table N_max={table.n_max}")
    return float(sum(c * table[a] for a, c in poly.coeffs.items()))


def is_symmetric(shape):
    """True iff the shape is invariant under every coordinate sign flip."""
    if shape.kind == "ball":
        return True
    verts = np.asarray(shape.vertices, dtype=float).reshape(-1, shape.dim)
    for axis in range(shape.dim):
        flipped = verts.copy()
        flipped[:, axis] *= -1.0
        for v in flipped:
            if np.min(np.linalg.norm(verts - v, axis=1)) > 1e-12:
                return False
    return True


# ---------------------------------------------------------------------------
# data jets


class DataJet:
    """Exact Taylor data of polynomial f1, f2, u* around x0.

    F^(k)(y) = (1/(k-2)!) grad^{k-2}(f1-f2)(x0)[y]^{k-2}  (F^(1) = 0)
    a_j(x)   = (1/j!)     grad^j    (f2-f1)(x0)[x]^j
    """

    def __init__(self, dim, f1, f2, u_star=None, x0=None, order=8):
        self.dim = dim
        self.order = order
        self.x0 = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float)
        self.f1 = f1
        self.f2 = f2
        self.u_star = u_star if u_star is not None else Poly.zero(dim)
        diff = f1 - f2
        if diff.degree > order:
            raise ValueError("data degree exceeds jet order")
        self.diff_shifted = diff.shift(self.x0)          # (f1-f2)(x0 + y) in y
        self.neg_diff_shifted = -self.diff_shifted        # (f2-f1)(x0 + y)

    def F_polynomial(self, k):
        if k < 1:
            raise ValueError("k >= 1 required")
        if k == 1:
            return Poly.zero(self.dim)
        if k - 2 > self.order:
            raise ValueError(f"jet order {self.order} insufficient for F^({k})")
        return self.diff_shifted.homogeneous_part(k - 2)

    def a_polynomial(self, j):
        if j > self.order:
            raise ValueError(f"jet order {self.order} insufficient for a_{j}")
        return self.neg_diff_shifted.homogeneous_part(j)


__all__ = [
    "InclusionShape",
    "MomentTable",
    "DataJet",
    "unit_ball",
    "compute_moments",
    "weighted_moment",
    "is_symmetric",
]
