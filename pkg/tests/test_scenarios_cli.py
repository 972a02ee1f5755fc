from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from qlmaxwell import cli
from qlmaxwell.errors import ConfigInvalid
from qlmaxwell.scenarios import build_scenario, load_config, validate_config

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))


def _write(tmp_path: Path, cfg: dict, name: str = "cfg.json") -> str:
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


SMALL = {"grid": {"cells": [8, 8, 8]}, "law": {"name": "linear"}, "data": {"kind": "plane-wave",
         "params": {"amplitude": 0.1}}, "time": {"T": 0.2}}


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_build(path):
    sc = build_scenario(json.loads(path.read_text()))
    assert sc.T > 0 and sc.data.u0.shape == sc.grid.shape + (6,)


def test_unknown_key_reports_dotted_path():
    with pytest.raises(ConfigInvalid) as e:
        validate_config({"solver": {"bogus": 1}})
    assert e.value.details["key"].startswith("solver")
    with pytest.raises(ConfigInvalid) as e:
        validate_config({"data": {"kind": "teleport"}})
    assert e.value.details["key"] == "data.kind"


def test_defaults_merged():
    full = validate_config({})
    assert full["solver"]["integrator"] == "rk4" and full["time"]["cfl"] == 0.4


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.json")


def test_finite_cleaning():
    assert cli._clean({"a": float("nan"), "b": np.inf, "c": -np.inf, "d": np.float64(1.5)}) == \
        {"a": "nan", "b": "inf", "c": "-inf", "d": 1.5}


def test_simulate_zero_writes_report_and_csv(tmp_path):
    rep, out = tmp_path / "r.json", tmp_path / "ts.csv"
    cfg = _write(tmp_path, {"grid": {"cells": [8, 8, 8]}, "time": {"T": 0.2}})
    assert cli.main(["simulate", cfg, "--report", str(rep), "--csv", str(out)]) == 0
    report = json.loads(rep.read_text())
    assert report["status"] == "ok"
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "L2", "Hm", "omega", "dist_boundaryU", "trace_sup", "energy_lhs", "energy_rhs"]
    assert len(rows) > 2 and float(rows[1][1]) == 0.0


def test_unknown_law_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, {"law": {"name": "vacuum"}})
    assert cli.main(["simulate", cfg]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "error" and err["details"]["key"] == "law.name"


def test_check_compat_ok(tmp_path, capsys):
    assert cli.main(["check-compat", _write(tmp_path, SMALL)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "ok" and out["compat"]["passed"]


def test_energy_audit_reports_order(tmp_path):
    rep = tmp_path / "e.json"
    cfg = dict(SMALL, study={"resolutions": [6, 12]})
    assert cli.main(["energy-audit", _write(tmp_path, cfg), "--report", str(rep)]) == 0
    report = json.loads(rep.read_text())
    assert "order_estimate" in report and len(report["rows"]) == 2


def test_localize_verify(capsys):
    assert cli.main(["localize-verify", "half-space", "--samples", "20"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]


def test_blowup_config_triggers_monitor(tmp_path):
    cfg = json.loads((Path(__file__).parent.parent / "configs" / "kerr-blowup.json").read_text())
    cfg["grid"]["cells"] = [8, 8, 8]
    assert cli.main(["simulate", _write(tmp_path, cfg), "--report", str(tmp_path / "r.json")]) == 3


def test_reports_are_deterministic(tmp_path):
    cfg = _write(tmp_path, SMALL)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["simulate", cfg, "--report", str(a)]) == 0
    assert cli.main(["simulate", cfg, "--report", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
