"""Sparse multivariate polynomials with exact coefficient arithmetic.

Shared helper for the moment tables, kernel Taylor terms and data jets.
Exponent tuples map to float coefficients; all operations (product, affine
substitution, differentiation) are exact up to float rounding, which keeps
every moment/jet computation free of quadrature error.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

_TOL = 0.0  # coefficients are kept exactly; zero pruning only for exact zeros


class Poly:
    """Polynomial in `dim` variables: {exponent tuple: coefficient}."""

    __slots__ = ("dim", "coeffs")

    def __init__(self, dim, coeffs=None):
        self.dim = int(dim)
        self.coeffs = {}
        if coeffs:
            for alpha, c in coeffs.items():
                if c != 0.0:
                    alpha = tuple(int(a) for a in alpha)
                    if len(alpha) != self.dim:
                        raise ValueError("exponent arity mismatch")
                    self.coeffs[alpha] = self.coeffs.get(alpha, 0.0) + float(c)

    @classmethod
    def zero(cls, dim):
        return cls(dim)

    @classmethod
    def constant(cls, dim, c):
        p = cls(dim)
        if c != 0.0:
            p.coeffs[(0,) * dim] = float(c)
        return p

    @classmethod
    def monomial(cls, dim, alpha, c=1.0):
        p = cls(dim)
        if c != 0.0:
            p.coeffs[tuple(int(a) for a in alpha)] = float(c)
        return p

    @classmethod
    def variable(cls, dim, i):
        alpha = [0] * dim
        alpha[i] = 1
        return cls.monomial(dim, alpha, 1.0)

    # -- ring operations -------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.dim, other)
        out = Poly(self.dim)
        out.coeffs = dict(self.coeffs)
        for a, c in other.coeffs.items():
            v = out.coeffs.get(a, 0.0) + c
            if v == 0.0:
                out.coeffs.pop(a, None)
            else:
                out.coeffs[a] = v
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Poly(self.dim)
        out.coeffs = {a: -c for a, c in self.coeffs.items()}
        return out

    def __sub__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.dim, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        out = Poly(self.dim)
        if not isinstance(other, Poly):
            s = float(other)
            if s != 0.0:
                out.coeffs = {a: c * s for a, c in self.coeffs.items()}
            return out
        acc = {}
        for a, ca in self.coeffs.items():
            for b, cb in other.coeffs.items():
                key = tuple(x + y for x, y in zip(a, b))
                acc[key] = acc.get(key, 0.0) + ca * cb
        out.coeffs = {a: c for a, c in acc.items() if c != 0.0}
        return out

    __rmul__ = __mul__

    def __pow__(self, n):
        n = int(n)
        if n < 0:
            raise ValueError("negative power")
        out = Poly.constant(self.dim, 1.0)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.dim == other.dim and self.coeffs == other.coeffs

    def __repr__(self):
        if not self.coeffs:
            return "Poly(0)"
        parts = [f"{c!r}*x^{a}" for a, c in sorted(self.coeffs.items())]
        return "Poly(" + " + ".join(parts) + ")"

    # -- structure -------------------------------------------------------

    @property
    def degree(self):
        if not self.coeffs:
            return -1
        return max(sum(a) for a in self.coeffs)

    def is_zero(self, tol=0.0):
        return all(abs(c) <= tol for c in self.coeffs.values())

    def homogeneous_part(self, n):
        out = Poly(self.dim)
        out.coeffs = {a: c for a, c in self.coeffs.items() if sum(a) == n}
        return out

    def truncate(self, max_degree):
        out = Poly(self.dim)
        out.coeffs = {a: c for a, c in self.coeffs.items() if sum(a) <= max_degree}
        return out

    def deriv(self, axis):
        out = Poly(self.dim)
        for a, c in self.coeffs.items():
            if a[axis] > 0:
                b = list(a)
                b[axis] -= 1
                out.coeffs[tuple(b)] = out.coeffs.get(tuple(b), 0.0) + c * a[axis]
        return out

    def coefficient(self, alpha):
        return self.coeffs.get(tuple(alpha), 0.0)

    # -- substitution ----------------------------------------------------

    def substitute(self, replacements):
        """Substitute each variable x_i by replacements[i] (Polys in m vars)."""
        if len(replacements) != self.dim:
            raise ValueError("need one replacement per variable")
        m = replacements[0].dim
        # cache powers of each replacement
        maxpow = [0] * self.dim
        for a in self.coeffs:
            for i, e in enumerate(a):
                maxpow[i] = max(maxpow[i], e)
        powers = []
        for i, r in enumerate(replacements):
            ps = [Poly.constant(m, 1.0)]
            for _ in range(maxpow[i]):
                ps.append(ps[-1] * r)
            powers.append(ps)
        out = Poly(m)
        for a, c in self.coeffs.items():
            term = Poly.constant(m, c)
            for i, e in enumerate(a):
                if e:
                    term = term * powers[i][e]
            out = out + term
        return out

    def affine(self, A, b):
        """p(b + A @ u) as a Poly in the u variables (A: (dim, m))."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        m = A.shape[1]
        reps = []
        for i in range(self.dim):
            r = Poly.constant(m, b[i])
            for j in range(m):
                if A[i, j] != 0.0:
                    r = r + Poly.variable(m, j) * A[i, j]
            reps.append(r)
        return self.substitute(reps)

    def shift(self, x0):
        """p(x0 + y) as a Poly in y."""
        return self.affine(np.eye(self.dim), np.asarray(x0, dtype=float))

    # -- evaluation --------------------------------------------------------

    def __call__(self, points):
        """Evaluate at points of shape (..., dim) or a single point (dim,)."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        out = np.zeros(pts.shape[:-1])
        for a, c in self.coeffs.items():
            term = np.full(pts.shape[:-1], c)
            for i, e in enumerate(a):
                if e:
                    term = term * pts[..., i] ** e
            out += term
        return out[0] if single else out

    def gradient(self):
        return [self.deriv(i) for i in range(self.dim)]


def compositions(total, parts):
    """All tuples of `parts` nonnegative ints summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def multinomial(alpha):
    """Multinomial coefficient (sum alpha)! / prod(alpha_i!)."""
    n = sum(alpha)
    out = math.factorial(n)
    for a in alpha:
        out //= math.factorial(a)
    return out


def dot_power_expansion(i, dim):
    """(x . y)^i = sum over |gamma|=i of multinomial(gamma) x^gamma y^gamma."""
    for gamma in compositions(i, dim):
        yield gamma, multinomial(gamma)


def monomials_up_to(dim, degree):
    """All exponent tuples with total degree <= degree, deterministic order."""
    out = []
    for total in range(degree + 1):
        out.extend(sorted(compositions(total, dim), reverse=True))
    return out


def poly_from_table(dim, table):
    """Poly from a [[exponents, coeff], ...] coefficient table."""
    p = Poly(dim)
    for entry in table:
        alpha, c = entry
        p = p + Poly.monomial(dim, alpha, float(c))
    return p


def all_partitions_of_pairs(j, dim):
    """(|y|^2)^j = sum over |delta|=j of multinomial(delta) y^(2 delta)."""
    for delta in compositions(j, dim):
        yield delta, multinomial(delta)


__all__ = [
    "Poly",
    "compositions",
    "multinomial",
    "dot_power_expansion",
    "monomials_up_to",
    "poly_from_table",
    "all_partitions_of_pairs",
]
