"""TOML run configuration: parsing, validation, and workspace construction.

All physical functions (f1, f2, u*) are entered as polynomial coefficient
tables — no expression parsing — so data jets stay exact. Validation collects
every violated invariant before reporting, producing one machine-readable
error record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .fields import GridSpec, parse_face
from .moments import InclusionShape
from .poly import Poly, poly_from_table

N_MAX_DEFAULT = 8
MAX_ORDER = 12


class ConfigError(Exception):
    """Carries the full list of violated invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))

    def record(self):
        return {"error": "invalid configuration", "violations": self.violations}


@dataclass
class RunConfig:
    dim: int
    cost: str
    alpha1: float
    alpha2: float
    grid: GridSpec
    x0: tuple
    shape: InclusionShape
    f1: Poly
    f2: Poly
    u_star: Poly
    order: int
    eps: list = field(default_factory=list)
    extract_order: int | None = None
    n_max: int = N_MAX_DEFAULT
    quad_order: int = 10


def _get(table, key, kind, errors, default=None, required=False):
    if key not in table:
        if required:
            errors.append(f"missing key '{key}'")
        return default
    val = table[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        errors.append(f"key '{key}' must be of type {kind.__name__}")
        return default
    return val


def _parse_poly(dim, table, name, errors):
    if table is None:
        return Poly.zero(dim)
    terms = table.get("terms", [])
    try:
        p = poly_from_table(dim, terms)
    except (TypeError, ValueError, IndexError):
        errors.append(f"data.{name}.terms must be a [[exponents, coeff], ...] table")
        return Poly.zero(dim)
    for alpha in p.coeffs:
        if len(alpha) != dim:
            errors.append(f"data.{name} exponent arity does not match dim={dim}")
            return Poly.zero(dim)
    return p


def load_config(path, overrides=None):
    """Parse and validate a TOML run configuration file."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return build_config(raw, overrides or {})


def build_config(raw, overrides=None):
    overrides = overrides or {}
    errors = []

    prob = raw.get("problem", {})
    dim = _get(prob, "dim", int, errors, required=True) or 2
    if dim not in (2, 3):
        errors.append("problem.dim must be 2 or 3")
        dim = 2
    cost = _get(prob, "cost", str, errors, default="H1")
    if cost not in ("L2", "H1"):
        errors.append("problem.cost must be 'L2' or 'H1'")
        cost = "H1"
    alpha1 = _get(prob, "alpha1", float, errors, default=1.0)
    alpha2 = _get(prob, "alpha2", float, errors, default=1.0)

    gtab = raw.get("grid", {})
    lo = tuple(gtab.get("lo", [0.0] * dim))
    hi = tuple(gtab.get("hi", [1.0] * dim))
    shape_n = gtab.get("shape", [65] * dim)
    if "grid" in overrides and overrides["grid"]:
        shape_n = [int(overrides["grid"])] * dim
    face_names = gtab.get("dirichlet_faces", ["x_lo"])
    faces = set()
    for fn in face_names:
        try:
            ax, side = parse_face(fn)
            if ax >= dim:
                errors.append(f"dirichlet face '{fn}' out of range for dim={dim}")
            else:
                faces.add((ax, side))
        except ValueError as exc:
            errors.append(str(exc))
    grid = None
    try:
        grid = GridSpec(tuple(float(v) for v in lo), tuple(float(v) for v in hi),
                        tuple(int(v) for v in shape_n), frozenset(faces))
    except (ValueError, TypeError) as exc:
        errors.append(f"grid: {exc}")

    itab = raw.get("inclusion", {})
    kind = _get(itab, "kind", str, errors, default="ball")
    x0 = tuple(float(v) for v in itab.get("x0", [0.5] * dim))
    if len(x0) != dim:
        errors.append("inclusion.x0 arity does not match dim")
        x0 = (0.5,) * dim
    shape = None
    try:
        if kind == "ball":
            shape = InclusionShape("ball", dim)
        elif kind == "polygon":
            verts = tuple(tuple(float(c) for c in v)
                          for v in itab.get("vertices", []))
            shape = InclusionShape("polygon", dim, verts)
        elif kind == "tet_mesh":
            tets = tuple(tuple(tuple(float(c) for c in p) for p in t)
                         for t in itab.get("tets", []))
            shape = InclusionShape("tet_mesh", dim, tets)
        else:
            errors.append(f"inclusion.kind '{kind}' unknown")
    except (ValueError, TypeError) as exc:
        errors.append(f"inclusion: {exc}")

    dtab = raw.get("data", {})
    f1 = _parse_poly(dim, dtab.get("f1"), "f1", errors)
    f2 = _parse_poly(dim, dtab.get("f2"), "f2", errors)
    u_star = _parse_poly(dim, dtab.get("u_star"), "u_star", errors)

    etab = raw.get("expansion", {})
    order = int(overrides.get("order") or etab.get("order", 5))
    if not 1 <= order <= MAX_ORDER:
        errors.append(f"expansion.order must be in [1, {MAX_ORDER}]")
        order = 5
    n_max = int(etab.get("n_max", N_MAX_DEFAULT))
    if not 1 <= n_max <= 12:
        errors.append("expansion.n_max must be in [1, 12]")
        n_max = N_MAX_DEFAULT
    if max(f1.degree, f2.degree, 0) > n_max:
        errors.append("polynomial data degree exceeds n_max")

    stab = raw.get("sweep", {})
    eps = [float(e) for e in stab.get("eps", [2.0 ** -i for i in range(3, 8)])]
    if any(e <= 0.0 or e >= 1.0 for e in eps):
        errors.append("sweep.eps values must lie in (0, 1)")
    extract_order = stab.get("extract_order")
    if extract_order is not None:
        extract_order = int(extract_order)
        if extract_order < 1:
            errors.append("sweep.extract_order must be >= 1")

    if grid is not None:
        for a in range(dim):
            if not (grid.lo[a] < x0[a] < grid.hi[a]):
                errors.append(f"x0 component {a} outside the domain")
        diam = math.sqrt(sum((h - l) ** 2 for l, h in zip(grid.lo, grid.hi)))
        for a in range(dim):
            margin = min(x0[a] - grid.lo[a], grid.hi[a] - x0[a])
            if margin < 5 * grid.h[a]:
                errors.append("x0 closer than 5 grid cells to the boundary")
                break
            if margin < 0.2 * diam:
                errors.append("x0 closer than 0.2*diam(D) to the boundary")
                break

    if errors:
        raise ConfigError(sorted(set(errors)))
    return RunConfig(dim, cost, alpha1, alpha2, grid, x0, shape,
                     f1, f2, u_star, order, eps, extract_order,
                     n_max=n_max, quad_order=int(etab.get("quad_order", 10)))


def make_workspace(cfg):
    from .solver import Workspace
    return Workspace(cfg.grid, cfg.x0, cfg.shape, cfg.f1, cfg.f2, cfg.u_star,
                     alpha1=cfg.alpha1, alpha2=cfg.alpha2,
                     n_max=cfg.n_max, quad_order=cfg.quad_order)


__all__ = ["RunConfig", "ConfigError", "load_config", "build_config",
           "make_workspace"]
