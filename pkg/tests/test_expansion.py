"""Coefficient assembly, scale ladder, and ledger serialization."""

import math

import numpy as np
import pytest

from topoderiv.expansion import (ExpansionLedger, LedgerEntry, ScaleFunction,
                                 compute_expansion, corrector_depth,
                                 evaluate_ledger, ladder_scale, special_case)
from topoderiv.kernels import log_constant_b

from conftest import make_ball_const_workspace


# ---------------------------------------------------------------------------
# scale ladder


def test_ladder_values_d2():
    m = 2.0
    eps = 0.25
    assert math.isclose(ladder_scale(1, 2, m)(eps), m * eps ** 2)
    assert math.isclose(ladder_scale(2, 2, m)(eps),
                        m * eps ** 3 * math.log(eps))
    assert math.isclose(ladder_scale(3, 2, m)(eps), m * eps ** 3)
    assert math.isclose(ladder_scale(4, 2, m)(eps),
                        m * eps ** 4 * math.log(eps))
    assert math.isclose(ladder_scale(5, 2, m)(eps), m * eps ** 4)


def test_ladder_values_d3():
    m = 1.5
    eps = 0.1
    for k in range(1, 6):
        assert math.isclose(ladder_scale(k, 3, m)(eps),
                            m * eps ** (3 + k - 1))


def test_ladder_magnitudes_decay():
    m = math.pi
    for d in (2, 3):
        for eps in (0.05, 0.01):
            mags = [ladder_scale(k, d, m).magnitude(eps) for k in range(1, 8)]
            assert all(a > b for a, b in zip(mags, mags[1:]))


def test_scale_function_domain():
    s = ladder_scale(2, 2, 1.0)
    with pytest.raises(ValueError):
        s(0.0)
    with pytest.raises(ValueError):
        s(1.0)
    with pytest.raises(ValueError):
        ScaleFunction(1, 2, 2, 1.0)  # log power beyond 1


def test_corrector_depth():
    assert corrector_depth("H1", 2, 5) == 2
    assert corrector_depth("H1", 2, 7) == 3
    assert corrector_depth("H1", 3, 3) == 1
    assert corrector_depth("L2", 3, 6) == 4


# ---------------------------------------------------------------------------
# ledger mechanics


def test_ledger_entry_breakdown_must_sum():
    s = ladder_scale(1, 2, 1.0)
    LedgerEntry(1, s, 2.0, {"a": 1.5, "b": 0.5})
    with pytest.raises(ValueError):
        LedgerEntry(1, s, 2.0, {"a": 1.0})


def test_evaluate_single_entry_ledger():
    led = ExpansionLedger("H1", 2, 1)
    led.entries.append(LedgerEntry(1, ladder_scale(1, 2, math.pi), 3.0,
                                   {"p0": 3.0}))
    eps = 0.125
    assert math.isclose(evaluate_ledger(led, eps),
                        3.0 * math.pi * eps ** 2, rel_tol=1e-14)


def test_ledger_json_round_trip(ws_d2):
    led = compute_expansion(ws_d2, "H1", 5)
    led2 = ExpansionLedger.from_json(led.to_json())
    for k in range(1, 6):
        assert led2.coefficient(k) == led.coefficient(k)
    eps = 0.07
    assert evaluate_ledger(led2, eps) == evaluate_ledger(led, eps)
    assert led.to_json() == led2.to_json()


# ---------------------------------------------------------------------------
# coefficient values (ball inclusion, constant data, d = 2)


def test_first_coefficient_is_jump_times_adjoint(ws_d2):
    led = compute_expansion(ws_d2, "H1", 1)
    from topoderiv.fields import jet_at
    p0 = ws_d2.solve_adjoint_p0("H1")
    jump = -2.0  # f2 - f1
    ref = jump * jet_at(p0, ws_d2.x0, 0).value()
    assert math.isclose(led.coefficient(1), ref, rel_tol=1e-12)


def test_log_slot_coefficients(ws_d2):
    # with constant data the even d=2 slots reduce to the log-companion
    # constants: d^(2n) = -alpha2 * b^(n) * (f2 - f1)(x0), zero for n = 1
    led = compute_expansion(ws_d2, "H1", 5)
    assert led.coefficient(2) == 0.0
    b2 = log_constant_b(2, ws_d2.moments, ws_d2.jet)
    ref = -ws_d2.alpha2 * b2 * (-2.0)
    assert math.isclose(led.coefficient(4), ref, rel_tol=1e-12)
    # closed form of the same slot: -alpha2 (f1 - f2)^2 / 2
    assert math.isclose(led.coefficient(4), -ws_d2.alpha2 * 4.0 / 2.0,
                        rel_tol=1e-12)


def test_odd_symmetric_slot_vanishes(ws_d2):
    led = compute_expansion(ws_d2, "H1", 3)
    # ball symmetry + constant data kill the order-3 slot
    assert abs(led.coefficient(3)) < 1e-8


def test_l2_low_order_structure(ws_d2):
    led = compute_expansion(ws_d2, "L2", 4)
    assert led.coefficient(2) == 0.0
    assert abs(led.coefficient(3)) < 1e-8
    # slot 4 cancels exactly for ball + constant data (two equal and
    # opposite contributions); the breakdown must still record both
    entry4 = [e for e in led.entries if e.k == 4][0]
    assert abs(led.coefficient(4)) < 1e-6
    assert any(abs(v) > 0.1 for v in entry4.breakdown.values())


# ---------------------------------------------------------------------------
# shortcut routes vs the general assembly


@pytest.mark.parametrize("cost", ["H1", "L2"])
def test_constant_route_matches_general(ws_d2, cost):
    led_gen = compute_expansion(ws_d2, cost, 5)
    led_fast = special_case(ws_d2, "constant_f", cost, 5)
    for k in range(1, 6):
        a, b = led_gen.coefficient(k), led_fast.coefficient(k)
        assert abs(a - b) < 1e-8 * max(1.0, abs(a))


def test_symmetric_route_matches_general(ws_d2):
    led_gen = compute_expansion(ws_d2, "H1", 5)
    led_sym = special_case(ws_d2, "symmetric", "H1", 5)
    for k in range(1, 6):
        a, b = led_gen.coefficient(k), led_sym.coefficient(k)
        assert abs(a - b) < 1e-8 * max(1.0, abs(a))


def test_ball_route_matches_general(ws_d2):
    led_gen = compute_expansion(ws_d2, "H1", 5)
    led_ball = special_case(ws_d2, "ball", "H1", 5)
    for k in range(1, 6):
        a, b = led_gen.coefficient(k), led_ball.coefficient(k)
        assert abs(a - b) < 1e-8 * max(1.0, abs(a))


def test_ball_route_d3():
    ws = make_ball_const_workspace(49, 3, n_max=4)
    led_gen = compute_expansion(ws, "H1", 3)
    led_ball = special_case(ws, "ball", "H1", 3)
    for k in range(1, 4):
        a, b = led_gen.coefficient(k), led_ball.coefficient(k)
        assert abs(a - b) < 1e-8 * max(1.0, abs(a))


def test_routes_validate_preconditions(ws_d2, tri_shape):
    from topoderiv.fields import GridSpec
    from topoderiv.poly import Poly
    from topoderiv.solver import Workspace
    with pytest.raises(ValueError):
        special_case(ws_d2, "nonsense", "H1", 3)
    with pytest.raises(ValueError):
        special_case(ws_d2, "ball", "L2", 3)
    grid = GridSpec((0, 0), (1, 1), (65, 65), frozenset({(0, 0)}))
    x = Poly.variable(2, 0)
    ws_lin = Workspace(grid, (0.5, 0.5), ws_d2.shape,
                       Poly.constant(2, 1.0) + x, Poly.zero(2))
    with pytest.raises(ValueError):
        special_case(ws_lin, "constant_f", "H1", 3)
    ws_tri = Workspace(grid, (0.5, 0.5), tri_shape,
                       Poly.constant(2, 1.0), Poly.zero(2))
    with pytest.raises(ValueError):
        special_case(ws_tri, "symmetric", "H1", 3)


def test_breakdown_sums_to_coefficient_everywhere(ws_d2):
    for cost in ("H1", "L2"):
        led = compute_expansion(ws_d2, cost, 5)
        for e in led.entries:
            total = sum(e.breakdown.values()) if e.breakdown else 0.0
            assert abs(total - e.coeff) <= 1e-12 * max(1.0, abs(e.coeff))
