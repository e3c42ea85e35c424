"""Configuration parsing/validation and the command-line interface."""

import json
import math
from pathlib import Path

import pytest

from topoderiv.cli import main
from topoderiv.config import ConfigError, build_config, load_config, make_workspace

REPO = Path(__file__).resolve().parents[1]
SAMPLE = REPO / "configs" / "ball_h1_d2.toml"

VALID = {
    "problem": {"dim": 2, "cost": "H1", "alpha1": 1.0, "alpha2": 1.0},
    "grid": {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "shape": [65, 65],
             "dirichlet_faces": ["x_lo"]},
    "inclusion": {"kind": "ball", "x0": [0.5, 0.5]},
    "data": {"f1": {"terms": [[[0, 0], 3.0]]},
             "f2": {"terms": [[[0, 0], 1.0]]}},
    "expansion": {"order": 5},
    "sweep": {"eps": [0.125, 0.0625, 0.03125], "extract_order": 2},
}


def _deep(d):
    return json.loads(json.dumps(d))


def test_sample_config_loads():
    cfg = load_config(str(SAMPLE))
    assert cfg.dim == 2 and cfg.cost == "H1"
    assert cfg.grid.shape == (129, 129)
    assert cfg.order == 5
    ws = make_workspace(cfg)
    assert ws.d == 2
    assert math.isclose(ws.moments.measure, math.pi, rel_tol=1e-12)


def test_build_config_valid():
    cfg = build_config(_deep(VALID))
    assert cfg.f1.coefficient((0, 0)) == 3.0
    assert cfg.extract_order == 2


def test_overrides():
    cfg = build_config(_deep(VALID), overrides={"grid": 33, "order": 3})
    assert cfg.grid.shape == (33, 33)
    assert cfg.order == 3


def test_invalid_config_collects_all_violations():
    raw = _deep(VALID)
    raw["problem"]["dim"] = 5
    raw["problem"]["cost"] = "Linf"
    raw["grid"]["dirichlet_faces"] = ["w_lo"]
    raw["expansion"]["order"] = 99
    raw["sweep"]["eps"] = [2.0]
    with pytest.raises(ConfigError) as exc:
        build_config(raw)
    rec = exc.value.record()
    assert rec["error"] == "invalid configuration"
    assert len(rec["violations"]) >= 5


def test_x0_margin_violation():
    raw = _deep(VALID)
    raw["inclusion"]["x0"] = [0.02, 0.5]
    with pytest.raises(ConfigError) as exc:
        build_config(raw)
    assert any("x0" in v for v in exc.value.violations)


def test_data_degree_must_fit_jet_order():
    raw = _deep(VALID)
    raw["data"]["f1"]["terms"] = [[[9, 0], 1.0]]
    raw["expansion"]["n_max"] = 4
    with pytest.raises(ConfigError) as exc:
        build_config(raw)
    assert any("degree" in v for v in exc.value.violations)


def test_cli_rejects_missing_config(capsys, tmp_path):
    rc = main(["moments", "--config", str(tmp_path / "nope.toml")])
    assert rc == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config file not found"


def test_cli_reports_violations_as_json(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('[problem]\ndim = 7\ncost = "Linf"\n')
    rc = main(["moments", "--config", str(bad)])
    assert rc == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "invalid configuration"
    assert len(err["violations"]) >= 2


def test_cli_moments(tmp_path):
    out = tmp_path / "out"
    rc = main(["moments", "--config", str(SAMPLE), "--out", str(out)])
    assert rc == 0
    data = json.loads((out / "moments.json").read_text())
    assert math.isclose(data["measure"], math.pi, rel_tol=1e-12)
    assert data["moments"]["0 0"] == data["measure"]


def test_cli_kernels(tmp_path):
    out = tmp_path / "out"
    rc = main(["kernels", "--config", str(SAMPLE), "--out", str(out),
               "--grid", "65", "--order", "4"])
    assert rc == 0
    data = json.loads((out / "kernels.json").read_text())
    assert "R" in data and "AB" in data and "log_constants" in data
    assert math.isclose(data["log_constants"]["2"]["b"], -1.0, rel_tol=1e-10)


def test_cli_expand_is_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["expand", "--config", str(SAMPLE), "--out", str(out),
                   "--grid", "65", "--order", "4"])
        assert rc == 0
        outs.append((out / "ledger.json").read_bytes())
    assert outs[0] == outs[1]
    led = json.loads(outs[0])
    assert led["order"] == 4
    ks = [e["k"] for e in led["entries"]]
    assert ks == [1, 2, 3, 4]


def test_cli_solve_writes_fields(tmp_path):
    out = tmp_path / "out"
    rc = main(["solve", "--config", str(SAMPLE), "--out", str(out),
               "--grid", "65", "--order", "4"])
    assert rc == 0
    hdr = json.loads((out / "u0.json").read_text())
    assert hdr["shape"] == [65, 65]
    n_vals = len((out / "u0.csv").read_text().strip().split("\n"))
    assert n_vals == 65 * 65


def test_cli_verify_outputs(tmp_path):
    out = tmp_path / "out"
    rc = main(["verify", "--config", str(SAMPLE), "--out", str(out),
               "--grid", "129", "--order", "3"])
    assert rc == 0
    csv = (out / "sweep.csv").read_text()
    assert csv.startswith("eps,delta_J_direct")
    data = json.loads((out / "sweep.json").read_text())
    assert "fits" in data and "extracted" in data
    led = json.loads((out / "ledger.json").read_text())
    assert led["cost"] == "H1"
