"""Fundamental solutions, their t-Taylor far-field terms, and multipole terms.

With A = |x|^2, b = (x.y)/|x|^2, c = |y|^2/|x|^2 one has
|x - t y|^2 = A (1 - 2 b t + c t^2), so every Taylor coefficient in t of the
kernels K(x - t y) is |x|^p (G_m(b, c) + ln|x| H_m(b, c)) with a fixed power p
per kernel. The G_m/H_m polynomials are generated once by exact truncated
power-series recurrences (log and binomial series of 1 - 2bt + ct^2), not by
numerical differentiation. Contracting the y-monomials against the shape's
moment table turns each order into a MultipoleTerm: a finite combination of
x^beta |x|^q (optionally times ln|x|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .moments import weighted_moment
from .poly import Poly, compositions, multinomial

MAX_TAYLOR_ORDER = 6          # public cap on kernel_taylor_term
_TABLE_ORDER = 8              # internal: S_l needs biharmonic order l + 2

FOUR_PI = 4.0 * math.pi
TWO_PI = 2.0 * math.pi
EIGHT_PI = 8.0 * math.pi


def _check_dim(d):
    if d not in (2, 3):
        raise ValueError("dimension must be 2 or 3")


# ---------------------------------------------------------------------------
# fundamental solutions


def laplace_fundamental(x, d):
    _check_dim(d)
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    if np.any(r == 0.0):
        raise ValueError("fundamental solution undefined at x = 0")
    if d == 2:
        return -np.log(r) / TWO_PI
    return 1.0 / (FOUR_PI * r)


def biharmonic_fundamental(x, d):
    _check_dim(d)
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    if d == 2:
        if np.any(r == 0.0):
            raise ValueError("biharmonic kernel undefined at x = 0 in d=2")
        return (r * r * np.log(r) - r * r) / EIGHT_PI
    return -r / EIGHT_PI


# ---------------------------------------------------------------------------
# series tables: K(x - t y) = sum_m t^m |x|^p (G_m(b,c) + ln|x| H_m(b,c))


def _series_mul(a, b, order):
    out = [Poly.zero(2) for _ in range(order + 1)]
    for i, ai in enumerate(a):
        if i > order:
            break
        for j, bj in enumerate(b):
            if i + j > order:
                break
            out[i + j] = out[i + j] + ai * bj
    return out


def _q_series(order):
    # q(t) = 1 - 2 b t + c t^2
    bvar = Poly.variable(2, 0)
    cvar = Poly.variable(2, 1)
    q = [Poly.constant(2, 1.0), -2.0 * bvar, cvar]
    q += [Poly.zero(2)] * max(0, order - 2)
    return q[: order + 1]


def _s_powers(order):
    # s(t) = 2 b t - c t^2; powers s^m truncated at `order`
    bvar = Poly.variable(2, 0)
    cvar = Poly.variable(2, 1)
    s = [Poly.zero(2), 2.0 * bvar, -1.0 * cvar] + [Poly.zero(2)] * max(0, order - 2)
    s = s[: order + 1]
    powers = [[Poly.constant(2, 1.0)] + [Poly.zero(2)] * order]
    for _ in range(order):
        powers.append(_series_mul(powers[-1], s, order))
    return powers


def _log_q_series(order):
    # ln(1 - s) = -sum_{m>=1} s^m / m
    sp = _s_powers(order)
    out = [Poly.zero(2) for _ in range(order + 1)]
    for m in range(1, order + 1):
        for i in range(order + 1):
            out[i] = out[i] - sp[m][i] * (1.0 / m)
    return out


def _pow_q_series(p, order):
    # (1 - s)^p = sum_m binom(p, m) (-s)^m
    sp = _s_powers(order)
    out = [Poly.zero(2) for _ in range(order + 1)]
    coef = 1.0
    for m in range(order + 1):
        for i in range(order + 1):
            out[i] = out[i] + sp[m][i] * (coef * (-1.0) ** m)
        coef *= (p - m) / (m + 1.0)
    return out


def _build_table(kernel, d, order=_TABLE_ORDER):
    """Return (p_exp, [G_m], [H_m]) for K(x - ty)."""
    if kernel == "laplace" and d == 2:
        # -(1/4pi)(ln A + ln q); ln A contributes 2 ln|x| at m=0
        L = _log_q_series(order)
        G = [(-1.0 / FOUR_PI) * Lm for Lm in L]
        H = [Poly.zero(2) for _ in range(order + 1)]
        H[0] = Poly.constant(2, -1.0 / TWO_PI)
        return 0, G, H
    if kernel == "laplace" and d == 3:
        Q = _pow_q_series(-0.5, order)
        G = [(1.0 / FOUR_PI) * Qm for Qm in Q]
        H = [Poly.zero(2) for _ in range(order + 1)]
        return -1, G, H
    if kernel == "biharmonic" and d == 2:
        # (1/16pi) A q (ln A + ln q) - (1/8pi) A q
        q = _q_series(order)
        L = _log_q_series(order)
        qL = _series_mul(q, L, order)
        G = [(1.0 / (2 * EIGHT_PI)) * qL[m] + (-1.0 / EIGHT_PI) * q[m]
             for m in range(order + 1)]
        H = [(1.0 / EIGHT_PI) * q[m] for m in range(order + 1)]
        return 2, G, H
    if kernel == "biharmonic" and d == 3:
        W = _pow_q_series(0.5, order)
        G = [(-1.0 / EIGHT_PI) * Wm for Wm in W]
        H = [Poly.zero(2) for _ in range(order + 1)]
        return 1, G, H
    raise ValueError(f"unknown kernel {kernel!r}")


_TABLES = {}


def _table(kernel, d):
    _check_dim(d)
    key = (kernel, d)
    if key not in _TABLES:
        _TABLES[key] = _build_table(kernel, d)
    return _TABLES[key]


def kernel_taylor_term(kernel, ell, x, y, d):
    """(1/ell!) d^ell/dt^ell K(x - t y) at t = 0, from the exact series table."""
    if ell < 0 or ell > MAX_TAYLOR_ORDER:
        raise ValueError(f"Taylor order {ell} unsupported (max {MAX_TAYLOR_ORDER})")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = float(np.dot(x, x))
    if r2 == 0.0:
        raise ValueError("x = 0 not allowed")
    p, G, H = _table(kernel, d)
    bval = float(np.dot(x, y)) / r2
    cval = float(np.dot(y, y)) / r2
    r = math.sqrt(r2)
    val = G[ell]((bval, cval)) + math.log(r) * H[ell]((bval, cval))
    return r ** p * val


# ---------------------------------------------------------------------------
# multipole terms


@dataclass(frozen=True)
class MultipoleTerm:
    """Homogeneous far-field term: sum c x^beta |x|^q (+ ln|x| companion)."""

    label: str                       # R | S | A | B
    source_order: int                # k
    order_index: int                 # ell or i
    dim: int
    degree: int                      # homogeneity of the algebraic factor
    terms: dict = field(default_factory=dict)      # (beta, q) -> coeff
    log_terms: dict = field(default_factory=dict)  # (beta, q) -> coeff of ln|x| part

    @property
    def has_log(self):
        return bool(self.log_terms)

    def is_zero(self):
        return not self.terms and not self.log_terms

    def _eval_part(self, part, pts, r):
        out = np.zeros(pts.shape[:-1])
        for (beta, q), c in part.items():
            term = np.full(pts.shape[:-1], c)
            for i, e in enumerate(beta):
                if e:
                    term = term * pts[..., i] ** e
            if q:
                term = term * r ** q
            out += term
        return out

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        r = np.linalg.norm(pts, axis=-1)
        out = self._eval_part(self.terms, pts, r)
        if self.log_terms:
            out = out + np.log(r) * self._eval_part(self.log_terms, pts, r)
        return out[0] if single else out

    def log_companion(self, x):
        """Value of the ln-companion factor (0 for non-log terms)."""
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        r = np.linalg.norm(pts, axis=-1)
        out = self._eval_part(self.log_terms, pts, r)
        return out[0] if single else out

    def _grad_part(self, part, pts, r):
        g = np.zeros(pts.shape)
        for (beta, q), c in part.items():
            base = np.full(pts.shape[:-1], c)
            for i, e in enumerate(beta):
                if e:
                    base = base * pts[..., i] ** e
            rq = r ** q if q else 1.0
            for i in range(self.dim):
                if beta[i]:
                    term = np.full(pts.shape[:-1], c * beta[i])
                    for jax, e in enumerate(beta):
                        ee = e - 1 if jax == i else e
                        if ee:
                            term = term * pts[..., jax] ** ee
                    g[..., i] += term * rq
                if q:
                    g[..., i] += base * q * r ** (q - 2) * pts[..., i]
        return g

    def gradient(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        r = np.linalg.norm(pts, axis=-1)
        g = self._grad_part(self.terms, pts, r)
        if self.log_terms:
            logval = self._eval_part(self.log_terms, pts, r)
            g = g + np.log(r)[..., None] * self._grad_part(self.log_terms, pts, r)
            g = g + logval[..., None] * pts / (r * r)[..., None]
        return g[0] if single else g


def _zero_term(label, k, idx, d, degree=0):
    return MultipoleTerm(label, k, idx, d, degree, {}, {})


def _contract(Gm, p_exp, F, moments, d):
    """Contract |x|^p * Gm(b, c) against F over omega into (beta, q) -> coeff."""
    out = {}
    for (i, j), g in Gm.coeffs.items():
        q = p_exp - 2 * (i + j)
        for gamma in compositions(i, d):
            cg = multinomial(gamma)
            for delta in compositions(j, d):
                cd = multinomial(delta)
                exps = tuple(gm + 2 * dl for gm, dl in zip(gamma, delta))
                mono = Poly.monomial(d, exps, 1.0)
                mval = weighted_moment(moments, mono * F)
                if mval == 0.0:
                    continue
                key = (gamma, q)
                out[key] = out.get(key, 0.0) + g * cg * cd * mval
    return {k: v for k, v in out.items() if v != 0.0}


def multipole_R(k, ell, moments, jet, d):
    """R^(k)_ell: the order-(ell-1) Laplace far-field term of U^(k)."""
    if k < 1 or ell < 1:
        raise ValueError("k >= 1 and ell >= 1 required")
    if k == 1:
        return _zero_term("R", k, ell, d)
    F = jet.F_polynomial(k)
    if F.is_zero():
        return _zero_term("R", k, ell, d)
    m = ell - 1
    p, G, H = _table("laplace", d)
    if m > len(G) - 1:
        raise ValueError(f"far-field order {ell} unsupported")
    terms = _contract(G[m], p, F, moments, d)
    log_terms = _contract(H[m], p, F, moments, d)
    degree = p - m
    return MultipoleTerm("R", k, ell, d, degree, terms, log_terms)


def multipole_S(k, ell, moments, jet, d, alpha1):
    """S^(k)_ell: order-(ell+2) biharmonic far-field term of P^(k)."""
    if ell < 1:
        raise ValueError("ell >= 1 required")
    if k in (0, 1) or alpha1 == 0.0:
        return _zero_term("S", k, ell, d, degree=-(d - 2 + ell))
    F = jet.F_polynomial(k)
    if F.is_zero():
        return _zero_term("S", k, ell, d, degree=-(d - 2 + ell))
    m = ell + 2
    p, G, H = _table("biharmonic", d)
    if m > len(G) - 1:
        raise ValueError(f"far-field order {ell} unsupported")
    if not H[m].is_zero():
        raise AssertionError("biharmonic log terms must stop at order 2")
    terms = _contract((-alpha1) * G[m], p, F, moments, d)
    return MultipoleTerm("S", k, ell, d, p - m, terms, {})


def leading_AB(k, moments, jet, d, alpha1):
    """Leading biharmonic far-field terms: A2,A1,A0,B2,B1,B0 (d=2), A1,A0,A-1 (d=3).

    The A_i of d=2 are the pure ln-companion polynomials; the full far field is
    sum_i A_i(x) ln|x| + B_i(x) (+ S terms). In d=3 there are no logs.
    """
    p, G, H = _table("biharmonic", d)
    out = []
    F = jet.F_polynomial(k) if k >= 2 else Poly.zero(d)
    zero = F.is_zero() or alpha1 == 0.0
    if d == 2:
        for m in range(3):
            deg = p - m
            if zero:
                out.append(_zero_term("A", k, 2 - m, d, deg))
            else:
                out.append(MultipoleTerm(
                    "A", k, 2 - m, d, deg,
                    _contract((-alpha1) * H[m], p, F, moments, d), {}))
        for m in range(3):
            deg = p - m
            if zero:
                out.append(_zero_term("B", k, 2 - m, d, deg))
            else:
                out.append(MultipoleTerm(
                    "B", k, 2 - m, d, deg,
                    _contract((-alpha1) * G[m], p, F, moments, d), {}))
    else:
        for m in range(3):
            deg = p - m
            if zero:
                out.append(_zero_term("A", k, 1 - m, d, deg))
            else:
                out.append(MultipoleTerm(
                    "A", k, 1 - m, d, deg,
                    _contract((-alpha1) * G[m], p, F, moments, d), {}))
    return out


# ---------------------------------------------------------------------------
# logarithmic constants


@dataclass(frozen=True)
class LogConstant:
    b_k: float
    c_k: float  # = -alpha2 * b_k, exactly


def log_constant_b(k, moments, jet):
    """b^(k) = -(1/2pi) int_omega F^(k); b^(1) = 0."""
    if k < 1:
        raise ValueError("k >= 1 required")
    if k == 1:
        return 0.0
    F = jet.F_polynomial(k)
    if F.is_zero():
        return 0.0
    return -weighted_moment(moments, F) / TWO_PI


def log_constants(k, moments, jet, alpha2):
    b = log_constant_b(k, moments, jet)
    return LogConstant(b, -alpha2 * b)


__all__ = [
    "MAX_TAYLOR_ORDER",
    "MultipoleTerm",
    "LogConstant",
    "laplace_fundamental",
    "biharmonic_fundamental",
    "kernel_taylor_term",
    "multipole_R",
    "multipole_S",
    "leading_AB",
    "log_constant_b",
    "log_constants",
]
