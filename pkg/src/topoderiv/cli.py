"""Command-line interface: subcommand dispatch over a TOML configuration.

Outputs are deterministic: floats are serialized via repr (17 significant
digits), JSON keys are sorted, and no timestamps enter data files.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np


def _thread_cap():
    cap = os.environ.get("TOPODERIV_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _write(out_dir, name, text):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _field_dump(out_dir, name, fld):
    """Field dump: JSON header (dims, spacing, labels) + CSV of nodal values."""
    grid = fld.grid
    header = {
        "name": name,
        "dim": grid.dim,
        "shape": list(grid.shape),
        "lo": [float(v) for v in grid.lo],
        "hi": [float(v) for v in grid.hi],
        "spacing": [float(v) for v in grid.h],
        "dirichlet_faces": sorted(
            f"{'xyz'[a]}_{'lo' if s == 0 else 'hi'}"
            for a, s in grid.dirichlet_faces),
        "order": "C",
    }
    _write(out_dir, f"{name}.json", _dump_json(header))
    lines = "\n".join(repr(float(v)) for v in fld.values.ravel())
    _write(out_dir, f"{name}.csv", lines + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_moments(cfg, out_dir):
    from .moments import compute_moments
    table = compute_moments(cfg.shape, cfg.n_max)
    data = {
        "dim": table.dim,
        "n_max": table.n_max,
        "measure": float(table.measure),
        "moments": {" ".join(map(str, a)): float(v)
                    for a, v in sorted(table.values.items())},
    }
    _write(out_dir, "moments.json", _dump_json(data))
    return 0


def _cmd_kernels(cfg, out_dir):
    from .kernels import (leading_AB, log_constant_b, log_constants,
                          multipole_R)
    from .moments import DataJet, compute_moments
    moments = compute_moments(cfg.shape, cfg.n_max)
    jet = DataJet(cfg.dim, cfg.f1, cfg.f2, cfg.u_star, cfg.x0, order=cfg.n_max)
    probes = [np.full(cfg.dim, 1.5), np.full(cfg.dim, -2.0)]
    probes[1][0] = 2.0
    data = {"dim": cfg.dim, "probes": [[float(v) for v in p] for p in probes],
            "R": {}, "AB": {}, "log_constants": {}}
    for k in range(1, min(cfg.order, 6) + 1):
        data["log_constants"][str(k)] = {
            "b": float(log_constant_b(k, moments, jet)),
            "c": float(log_constants(k, moments, jet, cfg.alpha2).c_k)}
        for ell in range(1, 4):
            term = multipole_R(k, ell, moments, jet, cfg.dim)
            data["R"][f"k={k},l={ell}"] = [float(term(p)) for p in probes]
        ab = leading_AB(k, moments, jet, cfg.dim, cfg.alpha1)
        labels = (["A2", "A1", "A0", "B2", "B1", "B0"] if cfg.dim == 2
                  else ["A1", "A0", "A-1"])
        data["AB"][str(k)] = {lab: [float(t(p)) for p in probes]
                              for lab, t in zip(labels, ab)}
    _write(out_dir, "kernels.json", _dump_json(data))
    return 0


def _cmd_solve(cfg, out_dir):
    from .config import make_workspace
    from .expansion import corrector_depth
    ws = make_workspace(cfg)
    _field_dump(out_dir, "u0", ws.u0)
    _field_dump(out_dir, "p0", ws.solve_adjoint_p0(cfg.cost))
    depth = corrector_depth(cfg.cost, cfg.dim, cfg.order)
    cs = ws.solve_correctors(depth, cfg.cost)
    for (name, k), fld in sorted(cs.fields.items()):
        _field_dump(out_dir, f"{name}_{k}", fld)
    return 0


def _cmd_expand(cfg, out_dir):
    from .config import make_workspace
    from .expansion import compute_expansion
    ws = make_workspace(cfg)
    ledger = compute_expansion(ws, cfg.cost, cfg.order)
    _write(out_dir, "ledger.json", ledger.to_json() + "\n")
    return 0


def _cmd_verify(cfg, out_dir):
    from .config import make_workspace
    from .expansion import compute_expansion
    from .verify import sweep
    ws = make_workspace(cfg)
    ledger = compute_expansion(ws, cfg.cost, cfg.order)
    result = sweep(ws, cfg.eps, ledger, cfg.cost,
                   extract_order=cfg.extract_order)
    _write(out_dir, "sweep.csv", result.to_csv())
    _write(out_dir, "sweep.json", result.to_json() + "\n")
    _write(out_dir, "ledger.json", ledger.to_json() + "\n")
    return 0


def _cmd_selftest(cfg, out_dir):
    candidates = [Path.cwd() / "tests" / "test_acceptance.py",
                  Path(__file__).resolve().parents[2] / "tests"
                  / "test_acceptance.py"]
    for cand in candidates:
        if cand.exists():
            proc = subprocess.run(
                [sys.executable, "-m", "pytest", str(cand), "-v"],
                cwd=str(cand.parents[1]))
            return proc.returncode
    print(json.dumps({"error": "acceptance suite not found",
                      "searched": [str(c) for c in candidates]}),
          file=sys.stderr)
    return 2


_COMMANDS = {
    "moments": _cmd_moments,
    "kernels": _cmd_kernels,
    "solve": _cmd_solve,
    "expand": _cmd_expand,
    "verify": _cmd_verify,
    "selftest": _cmd_selftest,
}


def main(argv=None):
    _thread_cap()
    parser = argparse.ArgumentParser(
        prog="topoderiv",
        description="Arbitrary-order topological derivatives of tracking-type "
                    "costs under Poisson right-hand-side perturbations.")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="TOML configuration")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--grid", type=int, default=None,
                        help="override nodes per axis")
    parser.add_argument("--order", type=int, default=None,
                        help="override expansion order")
    args = parser.parse_args(argv)

    from .config import ConfigError, load_config
    try:
        cfg = load_config(args.config,
                          overrides={"grid": args.grid, "order": args.order})
    except FileNotFoundError:
        print(json.dumps({"error": "config file not found",
                          "path": args.config}), file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(json.dumps(exc.record(), sort_keys=True), file=sys.stderr)
        return 2
    return _COMMANDS[args.subcommand](cfg, Path(args.out))


if __name__ == "__main__":
    sys.exit(main())
