"""Grid fields, cost quadrature, point jets, and inclusion masks."""

import math

import numpy as np
import pytest

from topoderiv.fields import (GridSpec, ScalarField, char_fraction, face_name,
                              field_from_function, integrate_H1_misfit,
                              integrate_L2_misfit, jet_at, parse_face,
                              zero_field)
from topoderiv.moments import InclusionShape, unit_ball
from topoderiv.poly import Poly

from conftest import make_grid


def test_face_name_round_trip():
    for name in ("x_lo", "x_hi", "y_lo", "y_hi", "z_lo", "z_hi"):
        assert face_name(*parse_face(name)) == name
    with pytest.raises(ValueError):
        parse_face("w_lo")
    with pytest.raises(ValueError):
        parse_face("x_mid")


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec((0.0,), (1.0,), (8,), frozenset({(0, 0)}))   # 1-D
    with pytest.raises(ValueError):
        GridSpec((0, 0), (1, 1), (8, 8), frozenset())          # no Dirichlet
    with pytest.raises(ValueError):
        GridSpec((0, 0), (1, 1), (3, 8), frozenset({(0, 0)}))  # too coarse
    with pytest.raises(ValueError):
        GridSpec((0, 0), (0, 1), (8, 8), frozenset({(0, 0)}))  # empty extent


def test_quadrature_weights_sum_to_volume():
    grid = make_grid(17, 2)
    assert math.isclose(float(grid.node_volumes().sum()), 1.0, rel_tol=1e-13)
    grid3 = make_grid(9, 3)
    assert math.isclose(float(grid3.node_volumes().sum()), 1.0, rel_tol=1e-13)


def test_misfit_values():
    grid = make_grid(65, 2)
    ones = ScalarField(grid, np.ones(grid.shape))
    zero = Poly.zero(2)
    assert math.isclose(integrate_L2_misfit(ones, zero), 1.0, rel_tol=1e-13)
    # u = x1: L2 integral 1/3 (trapezoid O(h^2)), gradient energy exactly 1
    u = field_from_function(grid, Poly.variable(2, 0))
    assert math.isclose(integrate_L2_misfit(u, zero), 1.0 / 3.0, rel_tol=1e-3)
    assert math.isclose(integrate_H1_misfit(u, zero), 1.0, rel_tol=1e-12)
    # misfit against itself vanishes
    assert integrate_L2_misfit(u, Poly.variable(2, 0)) < 1e-28


def test_field_arithmetic_and_grid_mismatch():
    g1, g2 = make_grid(17), make_grid(33)
    a = zero_field(g1)
    b = ScalarField(g1, np.ones(g1.shape))
    assert np.all((a + b).values == 1.0)
    assert np.all((2.0 * b).values == 2.0)
    with pytest.raises(ValueError):
        _ = a + zero_field(g2)
    with pytest.raises(ValueError):
        ScalarField(g1, np.ones(g2.shape))


def test_jet_recovers_polynomials_exactly():
    grid = make_grid(65, 2)
    x, y = Poly.variable(2, 0), Poly.variable(2, 1)
    p = 1.0 + 2.0 * x + 3.0 * x * y + 0.5 * y ** 2 + x ** 3
    fld = field_from_function(grid, p)
    jet = jet_at(fld, (0.5, 0.5), order=3)
    x0 = np.array([0.5, 0.5])
    assert math.isclose(jet.value(), float(p(x0)), rel_tol=1e-11)
    # first derivatives
    assert math.isclose(jet.derivative((1, 0)), float(p.deriv(0)(x0)),
                        rel_tol=1e-9)
    assert math.isclose(jet.derivative((0, 1)), float(p.deriv(1)(x0)),
                        rel_tol=1e-9)
    # mixed second derivative d2/dxdy = 3
    assert math.isclose(jet.derivative((1, 1)), 3.0, rel_tol=1e-8)


def test_jet_accuracy_on_smooth_field():
    grid = make_grid(129, 2)
    fld = ScalarField(grid, np.sin(grid.coords()[..., 0]
                                   + 0.5 * grid.coords()[..., 1]))
    jet = jet_at(fld, (0.5, 0.5), order=2)
    assert abs(jet.value() - math.sin(0.75)) < 1e-7
    assert abs(jet.derivative((1, 0)) - math.cos(0.75)) < 1e-5


def test_jet_order_bounds_and_boundary():
    grid = make_grid(33, 2)
    fld = zero_field(grid)
    jet = jet_at(fld, (0.5, 0.5), order=2)
    with pytest.raises(ValueError):
        jet.taylor_term(3)
    with pytest.raises(ValueError):
        jet_at(fld, (0.02, 0.5), order=2)  # stencil leaves the domain


def test_char_fraction_mass_ball():
    grid = make_grid(65, 2)
    for eps in (0.125, 0.05, 0.02):
        frac = char_fraction(grid, (0.5, 0.5), eps, unit_ball(2))
        mass = float(np.sum(frac.values * grid.node_volumes()))
        target = math.pi * eps ** 2
        assert abs(mass - target) < 1e-3 * target
        assert frac.values.min() >= 0.0 and frac.values.max() <= 1.0


def test_char_fraction_mass_ball_d3():
    grid = make_grid(33, 3)
    eps = 0.1
    frac = char_fraction(grid, (0.5, 0.5, 0.5), eps, unit_ball(3))
    mass = float(np.sum(frac.values * grid.node_volumes()))
    target = 4.0 / 3.0 * math.pi * eps ** 3
    assert abs(mass - target) < 1e-3 * target


def test_char_fraction_mass_polygon():
    grid = make_grid(129, 2)
    sq = InclusionShape("polygon", 2, ((-1, -1), (1, -1), (1, 1), (-1, 1)))
    eps = 0.1
    frac = char_fraction(grid, (0.5, 0.5), eps, sq)
    mass = float(np.sum(frac.values * grid.node_volumes()))
    assert abs(mass - 4 * eps ** 2) < 2e-3 * 4 * eps ** 2


def test_char_fraction_rejects_boundary_contact():
    grid = make_grid(65, 2)
    with pytest.raises(ValueError):
        char_fraction(grid, (0.05, 0.5), 0.1, unit_ball(2))
    with pytest.raises(ValueError):
        char_fraction(grid, (0.5, 0.5), 0.0, unit_ball(2))
