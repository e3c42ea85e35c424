"""Epsilon-sweep harness: direct cost differences vs ledger predictions.

The direct route solves the perturbed and unperturbed states on the same grid
and integrates the cost, so discretization error largely cancels in the
difference. Residuals after truncation order N are fitted against the next
ladder function; coefficients are re-extracted from the sweep by weighted
least squares as an independent check of every assembled formula.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .expansion import ladder_scale
from .fields import char_fraction, integrate_H1_misfit, integrate_L2_misfit

MASS_TOL = 1e-3
NOISE_FLOOR = 1e-11
MAX_CONDITION = 1e10


# ---------------------------------------------------------------------------
# direct evaluation


def direct_delta_J(ws, eps, cost_kind, check_mass=True):
    """J(Omega_eps) - J(Omega) from two solves on the workspace grid."""
    if cost_kind not in ("L2", "H1"):
        raise ValueError("cost_kind must be 'L2' or 'H1'")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if check_mass:
        frac = char_fraction(ws.grid, ws.x0, eps, ws.shape)
        mass = float(np.sum(frac.values * ws.grid.node_volumes()))
        target = eps ** ws.d * ws.moments.measure
        if abs(mass - target) > MASS_TOL * target:
            raise ValueError(
                f"inclusion unresolved on this grid: mass {mass:.6e} "
                f"vs |omega_eps| {target:.6e}")
    u0 = ws.solve_state(0.0)
    ue = ws.solve_state(eps)
    if cost_kind == "L2":
        return ws.alpha1 * (integrate_L2_misfit(ue, ws.u_star)
                            - integrate_L2_misfit(u0, ws.u_star))
    return ws.alpha2 * (integrate_H1_misfit(ue, ws.u_star)
                        - integrate_H1_misfit(u0, ws.u_star))


def predicted_partial(ledger, eps, N):
    """Sum of the first N ledger terms at eps."""
    return float(sum(e.scale(eps) * e.coeff for e in ledger.entries[:N]))


# ---------------------------------------------------------------------------
# order fitting


@dataclass
class OrderFit:
    slope: float
    intercept: float
    noise_limited: bool


def fit_order(next_scale_values, residuals, noise_scale=1.0):
    """Least-squares slope of ln|r_N| against ln|l_{N+1}(eps)|.

    Slope ~ 1 confirms r_N = O(l_{N+1}); the log factor of the d=2 ladder is
    absorbed by regressing against the ladder value rather than eps powers.
    """
    r = np.abs(np.asarray(residuals, dtype=float))
    x = np.abs(np.asarray(next_scale_values, dtype=float))
    if len(r) < 4:
        raise ValueError("need at least 4 sweep points for an order fit")
    floor = NOISE_FLOOR * max(1.0, abs(noise_scale))
    if np.median(r) < floor:
        return OrderFit(float("nan"), float("nan"), True)
    r = np.maximum(r, 1e-300)
    A = np.column_stack([np.log(x), np.ones(len(x))])
    sol, *_ = np.linalg.lstsq(A, np.log(r), rcond=None)
    return OrderFit(float(sol[0]), float(sol[1]), False)


# ---------------------------------------------------------------------------
# coefficient extraction


@dataclass
class ExtractionResult:
    coeffs: np.ndarray
    stderr: np.ndarray
    condition: float


def extract_coefficients(eps_list, values, scales, order):
    """Weighted least squares of values against [l_1(eps) ... l_order(eps)].

    Rows are weighted by 1/|l_1(eps)| so every sweep point contributes at
    comparable relative magnitude. The condition number of the column-scaled
    weighted design is reported; > 1e10 raises with guidance.
    """
    eps = np.asarray(eps_list, dtype=float)
    y = np.asarray(values, dtype=float)
    m = len(eps)
    if m < order + 2:
        raise ValueError("need at least order + 2 sweep points")
    if np.max(eps) / np.min(eps) < 4.0:
        raise ValueError("sweep must span at least two octaves in eps")
    X = np.array([[scales[k](e) for k in range(order)] for e in eps])
    w = 1.0 / np.abs(X[:, 0])
    Xw = X * w[:, None]
    yw = y * w
    col = np.linalg.norm(Xw, axis=0)
    if np.any(col == 0.0):
        raise ValueError("degenerate ladder column in the design matrix")
    Xs = Xw / col
    condition = float(np.linalg.cond(Xs))
    if condition > MAX_CONDITION:
        raise ValueError(
            f"ill-conditioned extraction design (cond={condition:.2e}); "
            "widen the eps span or lower the order")
    sol, res, rank, sv = np.linalg.lstsq(Xs, yw, rcond=None)
    coeffs = sol / col
    resid = yw - Xs @ sol
    dof = max(m - order, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(Xs.T @ Xs)
    stderr = np.sqrt(np.diag(cov)) / col
    return ExtractionResult(coeffs, stderr, condition)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    eps: list
    cost: str
    dim: int
    order: int
    direct: list
    predicted: dict = field(default_factory=dict)    # N -> list
    residuals: dict = field(default_factory=dict)    # N -> list
    fits: dict = field(default_factory=dict)         # N -> OrderFit
    extraction: ExtractionResult | None = None

    def __post_init__(self):
        e = np.asarray(self.eps, dtype=float)
        if len(e) > 1 and not np.all(np.diff(e) < 0):
            raise ValueError("eps list must be strictly decreasing")

    def to_csv(self):
        buf = io.StringIO()
        ns = sorted(self.predicted)
        header = ["eps", "delta_J_direct"]
        header += [f"pred_N{N}" for N in ns] + [f"r_N{N}" for N in ns]
        buf.write(",".join(header) + "\n")
        for i, e in enumerate(self.eps):
            row = [repr(float(e)), repr(float(self.direct[i]))]
            row += [repr(float(self.predicted[N][i])) for N in ns]
            row += [repr(float(self.residuals[N][i])) for N in ns]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def to_json(self):
        data = {
            "cost": self.cost,
            "dim": self.dim,
            "order": self.order,
            "eps": [float(e) for e in self.eps],
            "direct": [float(v) for v in self.direct],
            "fits": {str(N): {"slope": _jsonf(f.slope),
                              "intercept": _jsonf(f.intercept),
                              "noise_limited": f.noise_limited}
                     for N, f in self.fits.items()},
        }
        if self.extraction is not None:
            data["extracted"] = {
                "coeffs": [float(c) for c in self.extraction.coeffs],
                "stderr": [float(s) for s in self.extraction.stderr],
                "condition": float(self.extraction.condition),
            }
        return json.dumps(data, indent=2, sort_keys=True)


def _jsonf(x):
    return None if math.isnan(x) else float(x)


def sweep(ws, eps_list, ledger, cost_kind, extract_order=None,
          direct_ws=None):
    """Direct-vs-predicted sweep; `direct_ws` enables the cross-grid mode."""
    if ledger.order < 1:
        raise ValueError("ledger truncation order must be >= 1")
    eps = sorted((float(e) for e in eps_list), reverse=True)
    src = direct_ws if direct_ws is not None else ws
    direct = [direct_delta_J(src, e, cost_kind) for e in eps]
    result = SweepResult(eps, cost_kind, ws.d, ledger.order, direct)
    measure = ws.moments.measure
    scale_mag = max(abs(v) for v in direct) if direct else 1.0
    for N in range(1, ledger.order + 1):
        pred = [predicted_partial(ledger, e, N) for e in eps]
        res = [d - p for d, p in zip(direct, pred)]
        result.predicted[N] = pred
        result.residuals[N] = res
        next_scale = ladder_scale(N + 1, ws.d, measure)
        if len(eps) >= 4:
            result.fits[N] = fit_order([next_scale(e) for e in eps], res,
                                       noise_scale=scale_mag)
    if extract_order:
        scales = [ladder_scale(k + 1, ws.d, measure)
                  for k in range(extract_order)]
        result.extraction = extract_coefficients(eps, direct, scales,
                                                 extract_order)
    return result


__all__ = [
    "SweepResult",
    "OrderFit",
    "ExtractionResult",
    "direct_delta_J",
    "predicted_partial",
    "fit_order",
    "extract_coefficients",
    "sweep",
]
