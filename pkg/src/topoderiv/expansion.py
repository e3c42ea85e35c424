"""Assembly of the topological-derivative coefficients and their scale ladder.

Coefficients are epsilon-free reals; the epsilon-dependence lives entirely in
the ScaleFunction ladder. Every coefficient carries a term-by-term breakdown
mirroring the defining sum structure, so a mismatch localizes to one term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import jet_at
from .kernels import log_constant_b
from .moments import is_symmetric, weighted_moment
from .poly import Poly

BREAKDOWN_TOL = 1e-12


# ---------------------------------------------------------------------------
# scale ladder


@dataclass(frozen=True)
class ScaleFunction:
    """l(eps) = measure * eps^(dim + power) * ln(eps)^log_power.

    The |omega_eps| = eps^d |omega| normalization is carried explicitly via
    `dim` and `measure`. Entries with log_power = 1 are negative on (0, 1);
    the ladder-decay invariant is checked on absolute values.
    """

    power: int
    log_power: int
    dim: int
    measure: float

    def __post_init__(self):
        if self.log_power not in (0, 1):
            raise ValueError("log_power must be 0 or 1")

    def __call__(self, eps):
        eps = float(eps)
        if eps <= 0.0 or eps >= 1.0:
            raise ValueError("eps must lie in (0, 1)")
        val = self.measure * eps ** (self.dim + self.power)
        if self.log_power:
            val *= math.log(eps)
        return val

    def magnitude(self, eps):
        return abs(self(eps))


def ladder_scale(k, dim, measure):
    """The k-th ladder function for the given dimension."""
    if k < 1:
        raise ValueError("k >= 1 required")
    if dim == 2:
        if k == 1:
            return ScaleFunction(0, 0, 2, measure)
        n = k // 2
        if k % 2 == 0:
            return ScaleFunction(n, 1, 2, measure)
        return ScaleFunction(n, 0, 2, measure)
    if dim == 3:
        return ScaleFunction(k - 1, 0, 3, measure)
    raise ValueError("dimension must be 2 or 3")


# ---------------------------------------------------------------------------
# ledger


@dataclass
class LedgerEntry:
    k: int
    scale: ScaleFunction
    coeff: float
    breakdown: dict

    def __post_init__(self):
        total = sum(self.breakdown.values()) if self.breakdown else 0.0
        if abs(total - self.coeff) > BREAKDOWN_TOL * max(1.0, abs(self.coeff)):
            raise ValueError("breakdown does not sum to the coefficient")


@dataclass
class ExpansionLedger:
    cost: str
    dim: int
    order: int
    entries: list = field(default_factory=list)

    def coefficient(self, k):
        for e in self.entries:
            if e.k == k:
                return e.coeff
        raise KeyError(f"no entry of order {k}")

    def to_json(self):
        return json.dumps({
            "cost": self.cost,
            "dim": self.dim,
            "order": self.order,
            "entries": [{
                "k": e.k,
                "scale": {"a": e.scale.power, "log": e.scale.log_power,
                          "dim": e.scale.dim, "measure": float(e.scale.measure)},
                "coeff": float(e.coeff),
                "breakdown": {k2: float(v) for k2, v in e.breakdown.items()},
            } for e in self.entries],
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        out = cls(data["cost"], data["dim"], data["order"])
        for e in data["entries"]:
            s = e["scale"]
            out.entries.append(LedgerEntry(
                e["k"],
                ScaleFunction(s["a"], s["log"], s["dim"], s["measure"]),
                e["coeff"], dict(e["breakdown"])))
        return out


def evaluate_ledger(ledger, eps):
    """Sum of l_k(eps) * d^k over all entries."""
    return float(sum(e.scale(eps) * e.coeff for e in ledger.entries))


# ---------------------------------------------------------------------------
# term evaluation


class _Terms:
    """Shared term evaluators over one workspace/corrector-set/adjoint triple."""

    def __init__(self, ws, correctors, p0, cost_kind):
        self.ws = ws
        self.correctors = correctors
        self.p0 = p0
        self.cost_kind = cost_kind
        self.measure = ws.moments.measure
        self._jets = {}

    def _field_jet(self, key, fld, order):
        cache_key = (key, order)
        if cache_key not in self._jets:
            self._jets[cache_key] = jet_at(fld, self.ws.x0, order)
        return self._jets[cache_key]

    def _product_term(self, key, fld, j):
        """(1/(|w| j!)) int_w grad^j((f2-f1)*field)(x0)[x]^j dx."""
        if not np.any(fld.values):
            return 0.0
        jet = self._field_jet(key, fld, j)
        prod = (self.ws.jet.neg_diff_shifted * jet.poly).homogeneous_part(j)
        return weighted_moment(self.ws.moments, prod) / self.measure

    def p0_term(self, n):
        return self._product_term("p0", self.p0, n)

    def corr_term(self, name, sup, j):
        return self._product_term((name, sup), self.correctors.get(name, sup), j)

    def P_term(self, j, sup):
        """(1/|w|) int_w a_j(x) P^(sup)(x) dx."""
        a_j = self.ws.jet.a_polynomial(j)
        if a_j.is_zero():
            return 0.0
        if self.cost_kind == "H1":
            # P^(k) = -alpha2 U^(k): same potential object, scaled exactly
            return (-self.ws.alpha2
                    * self.ws.potential.integrate_against(a_j, sup, "U")
                    / self.measure)
        return self.ws.potential.integrate_against(a_j, sup, "P") / self.measure

    def c_term(self, j, sup):
        """(1/|w|) int_w a_j(x) dx * c^(sup), with c^(k) = -alpha2 b^(k)."""
        a_j = self.ws.jet.a_polynomial(j)
        if a_j.is_zero():
            return 0.0
        c = -self.ws.alpha2 * log_constant_b(sup, self.ws.moments, self.ws.jet)
        return c * weighted_moment(self.ws.moments, a_j) / self.measure


def _corr_sum(T, name, j_max, sup_of_j):
    out = {}
    for j in range(j_max + 1):
        out[f"{name}^({sup_of_j(j)})[j={j}]"] = T.corr_term(name, sup_of_j(j), j)
    return out


# ---------------------------------------------------------------------------
# the four general assemblies


def _breakdown_H1_d2(T, k):
    if k == 1:
        return {"p0": T.p0_term(0)}
    n = k // 2
    if k % 2 == 0:
        return {f"c^({n - j})[j={j}]": T.c_term(j, n - j)
                for j in range(n - 1)}
    out = {"p0": T.p0_term(n)}
    for j in range(n - 1):
        out[f"P^({n - j})[j={j}]"] = T.P_term(j, n - j)
    out.update(_corr_sum(T, "w", n - 2, lambda j: n - j))
    return out


def _breakdown_H1_d3(T, k):
    if k == 1:
        return {"p0": T.p0_term(0)}
    n = k - 1
    out = {"p0": T.p0_term(n)}
    for j in range(n - 1):
        out[f"P^({n - j})[j={j}]"] = T.P_term(j, n - j)
    out.update(_corr_sum(T, "w", n - 3, lambda j: n - 1 - j))
    return out


def _breakdown_L2_d2(T, k):
    if k == 1:
        return {"p0": T.p0_term(0)}
    n = k // 2
    if k % 2 == 0:
        out = {}
        out.update(_corr_sum(T, "s2", n - 2, lambda j: n - j))
        out.update(_corr_sum(T, "s4", n - 3, lambda j: n - 1 - j))
        out.update(_corr_sum(T, "s6", n - 4, lambda j: n - 2 - j))
        out.update(_corr_sum(T, "n", n - 2, lambda j: n - j))
        return out
    out = {"p0": T.p0_term(n)}
    for j in range(n - 3):
        out[f"P^({n - 2 - j})[j={j}]"] = T.P_term(j, n - 2 - j)
    out.update(_corr_sum(T, "s1", n - 2, lambda j: n - j))
    out.update(_corr_sum(T, "s3", n - 3, lambda j: n - 1 - j))
    out.update(_corr_sum(T, "s5", n - 4, lambda j: n - 2 - j))
    out.update(_corr_sum(T, "s7", n - 2, lambda j: n - j))
    out.update(_corr_sum(T, "s8", n - 3, lambda j: n - 1 - j))
    out.update(_corr_sum(T, "s9", n - 4, lambda j: n - 2 - j))
    out.update(_corr_sum(T, "w", n - 5, lambda j: n - 2 - j))
    out.update(_corr_sum(T, "m", n - 2, lambda j: n - j))
    return out


def _breakdown_L2_d3(T, k):
    if k == 1:
        return {"p0": T.p0_term(0)}
    n = k - 1
    out = {"p0": T.p0_term(n)}
    for j in range(n - 3):
        out[f"P^({n - 2 - j})[j={j}]"] = T.P_term(j, n - 2 - j)
    out.update(_corr_sum(T, "s1", n - 3, lambda j: n - 1 - j))
    out.update(_corr_sum(T, "s2", n - 4, lambda j: n - 2 - j))
    out.update(_corr_sum(T, "s3", n - 5, lambda j: n - 3 - j))
    out.update(_corr_sum(T, "w", n - 6, lambda j: n - 3 - j))
    out.update(_corr_sum(T, "m", n - 3, lambda j: n - 1 - j))
    return out


_BREAKDOWNS = {
    ("H1", 2): _breakdown_H1_d2,
    ("H1", 3): _breakdown_H1_d3,
    ("L2", 2): _breakdown_L2_d2,
    ("L2", 3): _breakdown_L2_d3,
}


def corrector_depth(cost_kind, dim, order):
    """Highest corrector superscript required by coefficients up to `order`."""
    if dim == 2:
        return max(1, order // 2)
    return max(1, order - 2)


def compute_expansion(ws, cost_kind, order):
    """ExpansionLedger of the first `order` coefficients for the workspace."""
    if cost_kind not in ("L2", "H1"):
        raise ValueError("cost_kind must be 'L2' or 'H1'")
    if order < 1:
        raise ValueError("order >= 1 required")
    depth = corrector_depth(cost_kind, ws.d, order)
    correctors = ws.solve_correctors(depth, cost_kind)
    p0 = ws.solve_adjoint_p0(cost_kind)
    T = _Terms(ws, correctors, p0, cost_kind)
    build = _BREAKDOWNS[(cost_kind, ws.d)]
    measure = ws.moments.measure
    ledger = ExpansionLedger(cost_kind, ws.d, order)
    for k in range(1, order + 1):
        breakdown = build(T, k)
        coeff = float(sum(breakdown.values()))
        ledger.entries.append(
            LedgerEntry(k, ladder_scale(k, ws.d, measure), coeff, breakdown))
    return ledger


def dJ_H1_d2(ws, order):
    _require(ws.d == 2, "workspace dimension must be 2")
    return compute_expansion(ws, "H1", order)


def dJ_H1_d3(ws, order):
    _require(ws.d == 3, "workspace dimension must be 3")
    return compute_expansion(ws, "H1", order)


def dJ_L2_d2(ws, order):
    _require(ws.d == 2, "workspace dimension must be 2")
    return compute_expansion(ws, "L2", order)


def dJ_L2_d3(ws, order):
    _require(ws.d == 3, "workspace dimension must be 3")
    return compute_expansion(ws, "L2", order)


def _require(cond, msg):
    if not cond:
        raise ValueError(msg)


# ---------------------------------------------------------------------------
# special-case shortcut routes


def _constant_jump(ws):
    if ws.f1.degree > 0 or ws.f2.degree > 0:
        raise ValueError("route requires piecewise-constant data f1, f2")
    zero = (0,) * ws.d
    return ws.f2.coefficient(zero) - ws.f1.coefficient(zero)  # f2 - f1


def special_case(ws, route, cost_kind, order):
    """Shortcut coefficient assembly under a verified structural precondition.

    constant_f: piecewise-constant data; all a_j with j > 0 vanish, the jump
                factors out of every product.
    symmetric:  constant data + sign-flip-symmetric shape; odd moments vanish,
                so only matching-parity terms survive.
    ball:       constant data + unit ball (H1 only): the closed first-five
                (d=2) / first-three (d=3) formulas.
    """
    if route == "constant_f":
        return _special_constant(ws, cost_kind, order, parity=False)
    if route == "symmetric":
        if not is_symmetric(ws.shape):
            raise ValueError("route requires a sign-flip-symmetric shape")
        return _special_constant(ws, cost_kind, order, parity=True)
    if route == "ball":
        return _special_ball(ws, cost_kind, order)
    raise ValueError(f"unknown route {route!r}")


def _special_constant(ws, cost_kind, order, parity):
    """Constant-data shortcut: only j = 0 survives in data-Taylor sums; for the
    symmetric route additionally only even Taylor orders contribute."""
    jump = _constant_jump(ws)
    depth = corrector_depth(cost_kind, ws.d, order)
    correctors = ws.solve_correctors(depth, cost_kind)
    p0 = ws.solve_adjoint_p0(cost_kind)
    T = _Terms(ws, correctors, p0, cost_kind)
    build = _BREAKDOWNS[(cost_kind, ws.d)]
    measure = ws.moments.measure
    ledger = ExpansionLedger(cost_kind, ws.d, order)
    for k in range(1, order + 1):
        breakdown = {}
        for label, val in build(T, k).items():
            j = 0 if label == "p0" else int(label.split("[j=")[-1][:-1]) \
                if "[j=" in label else 0
            if label.startswith(("P", "c")) and j > 0:
                continue  # a_j = 0 for j > 0 with constant data
            if parity and label == "p0" and k > 1:
                # Taylor order of the p0 term
                n_tay = (k // 2) if ws.d == 2 else (k - 1)
                if n_tay % 2 == 1:
                    continue
            if parity and "[j=" in label and j % 2 == 1:
                continue
            breakdown[label] = val
        # with the jump constant, products reduce to jump * corrector jets;
        # the _Terms products already encode this exactly
        coeff = float(sum(breakdown.values()))
        ledger.entries.append(
            LedgerEntry(k, ladder_scale(k, ws.d, measure), coeff, breakdown))
    _ = jump  # precondition check only; terms already carry the constant
    return ledger


def _special_ball(ws, cost_kind, order):
    if ws.shape.kind != "ball":
        raise ValueError("route requires the unit-ball inclusion")
    jump = _constant_jump(ws)  # f2 - f1
    if cost_kind != "H1":
        raise ValueError("the ball shortcut route covers the H1 cost only")
    measure = ws.moments.measure
    p0 = ws.solve_adjoint_p0("H1")
    x0 = ws.x0
    ledger = ExpansionLedger("H1", ws.d, order)

    def add(k, breakdown):
        ledger.entries.append(LedgerEntry(
            k, ladder_scale(k, ws.d, measure),
            float(sum(breakdown.values())), breakdown))

    if ws.d == 2:
        if order > 5:
            raise ValueError("ball route provides the first five coefficients")
        p0_jet = jet_at(p0, x0, min(max(order - 3, 0), 2))
        add(1, {"p0": jump * p0_jet.value()})
        if order >= 2:
            add(2, {})
        if order >= 3:
            add(3, {})
        if order >= 4:
            add(4, {"closed": -ws.alpha2 * jump * jump / 2.0})
        if order >= 5:
            one = Poly.constant(2, 1.0)
            t1 = jump * weighted_moment(ws.moments,
                                        p0_jet.poly.homogeneous_part(2)) / measure
            t2 = (-ws.alpha2 * jump / measure
                  * ws.potential.integrate_against(one, 2, "U"))
            v2 = ws.solve_correctors(2, "H1").get("v", 2)
            t3 = -ws.alpha2 * jump * jet_at(v2, x0, 0).value()
            add(5, {"p0": t1, "U2": t2, "v2": t3})
    else:
        if order > 3:
            raise ValueError("ball route provides the first three coefficients")
        p0_jet = jet_at(p0, x0, min(max(order - 1, 0), 2))
        add(1, {"p0": jump * p0_jet.value()})
        if order >= 2:
            add(2, {"p0": jump * weighted_moment(
                ws.moments, p0_jet.poly.homogeneous_part(1)) / measure})
        if order >= 3:
            one = Poly.constant(3, 1.0)
            t1 = jump * weighted_moment(ws.moments,
                                        p0_jet.poly.homogeneous_part(2)) / measure
            t2 = (-ws.alpha2 * jump / measure
                  * ws.potential.integrate_against(one, 2, "U"))
            add(3, {"p0": t1, "U2": t2})
    return ledger


__all__ = [
    "ScaleFunction",
    "LedgerEntry",
    "ExpansionLedger",
    "ladder_scale",
    "corrector_depth",
    "compute_expansion",
    "evaluate_ledger",
    "special_case",
    "dJ_H1_d2",
    "dJ_H1_d3",
    "dJ_L2_d2",
    "dJ_L2_d3",
]
