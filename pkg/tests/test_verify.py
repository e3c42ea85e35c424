"""Sweep harness: direct differences, order fits, coefficient extraction."""

import math

import numpy as np
import pytest

from topoderiv.expansion import (ExpansionLedger, LedgerEntry, evaluate_ledger,
                                 ladder_scale)
from topoderiv.verify import (SweepResult, direct_delta_J,
                              extract_coefficients, fit_order,
                              predicted_partial, sweep)

from conftest import make_ball_const_workspace


def _synthetic_ledger(coeffs, dim=2, measure=math.pi):
    led = ExpansionLedger("H1", dim, len(coeffs))
    for k, c in enumerate(coeffs, start=1):
        led.entries.append(LedgerEntry(k, ladder_scale(k, dim, measure), c,
                                       {"synthetic": c}))
    return led


def test_synthetic_extraction_closure():
    # evaluate a known ladder combination, then re-extract the coefficients
    coeffs = [1.5, 0.25, -2.0, 0.8, 3.0]
    led = _synthetic_ledger(coeffs)
    eps = [2.0 ** (-3 - i / 2) for i in range(9)]
    values = [evaluate_ledger(led, e) for e in eps]
    scales = [ladder_scale(k, 2, math.pi) for k in range(1, 6)]
    res = extract_coefficients(eps, values, scales, 5)
    assert np.max(np.abs(res.coeffs - np.array(coeffs))) < 1e-9
    assert res.condition < 1e6


def test_synthetic_extraction_closure_d3():
    coeffs = [0.7, -1.2, 2.2]
    led = _synthetic_ledger(coeffs, dim=3, measure=4 * math.pi / 3)
    eps = [2.0 ** (-2 - i / 2) for i in range(7)]
    values = [evaluate_ledger(led, e) for e in eps]
    scales = [ladder_scale(k, 3, 4 * math.pi / 3) for k in range(1, 4)]
    res = extract_coefficients(eps, values, scales, 3)
    assert np.max(np.abs(res.coeffs - np.array(coeffs))) < 1e-10


def test_extraction_input_validation():
    scales = [ladder_scale(k, 2, 1.0) for k in range(1, 4)]
    eps = [0.1, 0.09, 0.08, 0.07, 0.06]
    vals = [1.0] * 5
    with pytest.raises(ValueError):
        extract_coefficients(eps, vals, scales, 3)   # span below two octaves
    with pytest.raises(ValueError):
        extract_coefficients([0.1, 0.01], [1.0, 2.0], scales, 3)  # too few


def test_fit_order_exact_slope():
    eps = [2.0 ** (-3 - i) for i in range(6)]
    s4 = ladder_scale(4, 2, math.pi)
    resid = [0.3 * s4(e) for e in eps]
    fit = fit_order([s4(e) for e in eps], resid)
    assert math.isclose(fit.slope, 1.0, abs_tol=1e-12)
    assert not fit.noise_limited
    # residuals decaying like the ladder squared give slope 2
    resid2 = [0.3 * s4(e) ** 2 for e in eps]
    fit2 = fit_order([s4(e) for e in eps], resid2)
    assert math.isclose(fit2.slope, 2.0, abs_tol=1e-12)


def test_fit_order_noise_flag_and_validation():
    x = [1e-1, 1e-2, 1e-3, 1e-4]
    fit = fit_order(x, [1e-14, -1e-15, 1e-15, 1e-16], noise_scale=1.0)
    assert fit.noise_limited
    with pytest.raises(ValueError):
        fit_order([1.0, 0.5], [1.0, 0.5])


def test_direct_difference_vanishes_without_perturbation():
    ws = make_ball_const_workspace(49, 2, f1_val=1.0, f2_val=1.0)
    for cost in ("H1", "L2"):
        assert abs(direct_delta_J(ws, 0.125, cost)) < 1e-9


def test_direct_difference_input_validation(ws_d2):
    with pytest.raises(ValueError):
        direct_delta_J(ws_d2, -0.1, "L2")
    with pytest.raises(ValueError):
        direct_delta_J(ws_d2, 0.1, "Linf")
    # a sub-cell sampled (non-ball) inclusion trips the mass check
    from topoderiv.fields import GridSpec
    from topoderiv.poly import Poly
    from topoderiv.solver import Workspace
    from topoderiv.moments import InclusionShape
    tri = InclusionShape("polygon", 2,
                         ((-0.5, -0.4), (0.9, -0.3), (-0.2, 0.8)))
    grid = GridSpec((0, 0), (1, 1), (17, 17), frozenset({(0, 0)}))
    ws = Workspace(grid, (0.5, 0.5), tri, Poly.constant(2, 1.0), Poly.zero(2))
    with pytest.raises(ValueError):
        direct_delta_J(ws, 0.004, "L2")


def test_predicted_partial_truncates():
    led = _synthetic_ledger([2.0, 1.0, 1.0])
    eps = 0.1
    full = evaluate_ledger(led, eps)
    p1 = predicted_partial(led, eps, 1)
    assert math.isclose(p1, 2.0 * math.pi * eps ** 2, rel_tol=1e-14)
    assert math.isclose(predicted_partial(led, eps, 3), full, rel_tol=1e-14)


def test_sweep_result_validation_and_csv():
    with pytest.raises(ValueError):
        SweepResult([0.1, 0.2], "H1", 2, 1, [0.0, 0.0])
    res = SweepResult([0.2, 0.1], "H1", 2, 1, [1.0, 0.5])
    res.predicted[1] = [0.9, 0.45]
    res.residuals[1] = [0.1, 0.05]
    csv = res.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "eps,delta_J_direct,pred_N1,r_N1"
    assert len(lines) == 3


def test_sweep_end_to_end_small(ws_d2):
    from topoderiv.expansion import compute_expansion
    led = compute_expansion(ws_d2, "H1", 3)
    eps = [2.0 ** (-3 - i / 2) for i in range(6)]
    res = sweep(ws_d2, eps, led, "H1", extract_order=3)
    # leading-order prediction already explains most of the signal
    r1 = np.abs(np.array(res.residuals[1]))
    d = np.abs(np.array(res.direct))
    assert np.all(r1 < 0.35 * d)
    # first extracted coefficient lands near the assembled one (coarse grid,
    # low extraction order: generous tolerance)
    assert abs(res.extraction.coeffs[0] - led.coefficient(1)) \
        < 0.05 * abs(led.coefficient(1))
    assert set(res.fits) == {1, 2, 3}
    data = res.to_json()
    assert '"extracted"' in data
