"""Shared fixtures: small, fast problem configurations reused across tests."""

import numpy as np
import pytest

from topoderiv.fields import GridSpec
from topoderiv.moments import InclusionShape
from topoderiv.poly import Poly
from topoderiv.solver import Workspace


def make_grid(n, dim=2, dirichlet=((0, 0),), lo=0.0, hi=1.0):
    return GridSpec((lo,) * dim, (hi,) * dim, (n,) * dim,
                    frozenset(dirichlet))


def make_ball_const_workspace(n=65, dim=2, f1_val=3.0, f2_val=1.0,
                              alpha1=1.0, alpha2=1.0, n_max=8):
    """Unit-ball inclusion at the box center with constant data."""
    grid = make_grid(n, dim)
    f1 = Poly.constant(dim, f1_val)
    f2 = Poly.constant(dim, f2_val)
    return Workspace(grid, (0.5,) * dim, InclusionShape("ball", dim),
                     f1, f2, alpha1=alpha1, alpha2=alpha2, n_max=n_max)


@pytest.fixture(scope="session")
def ws_d2():
    """65x65 ball/constant-data workspace (d=2), shared across unit tests."""
    return make_ball_const_workspace(65, 2)


@pytest.fixture(scope="session")
def tri_shape():
    """Asymmetric triangle containing the origin (nonzero odd multipoles)."""
    return InclusionShape("polygon", 2, ((-0.5, -0.4), (0.9, -0.3), (-0.2, 0.8)))


@pytest.fixture(scope="session")
def tet_shape():
    """Asymmetric single-tet inclusion containing the origin."""
    return InclusionShape(
        "tet_mesh", 3,
        (((-0.5, -0.4, -0.3), (0.8, -0.2, -0.25),
          (-0.1, 0.7, -0.2), (0.0, 0.1, 0.9)),))


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def assert_close(a, b, tol, msg=""):
    assert rel_err(a, b) < tol, f"{msg}: {a} vs {b} (rel {rel_err(a, b):.3e})"
