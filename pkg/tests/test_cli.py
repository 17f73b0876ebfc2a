import csv
import json
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from episis.cli import RunManifest, main, seed_streams

SCHEMA = json.loads(resources.files("episis").joinpath("schemas/summary.schema.json").read_text())


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    return code


def read_csv(path: Path):
    with path.open() as fh:
        return list(csv.reader(fh))


def test_simulate_toy6_two_controlled(tmp_path):
    out = tmp_path / "run"
    assert run(["simulate", "--net", "toy6", "--controlled", "a,d", "--out", out, "--horizon", 2000]) == 0
    summary = json.loads((out / "summary.json").read_text())
    jsonschema.validate(summary, SCHEMA)
    assert summary["terminal"] == "extinct"
    assert summary["final_gains"][0] > 0 and summary["final_gains"][3] > 0
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["t"] + [f"x_{i}" for i in range(1, 7)] + [f"g_{i}" for i in range(1, 7)]
    assert all(len(r) == 13 for r in rows)
    for name in ("avg_infection.svg", "infection.svg", "gains.svg", "r_t.svg"):
        text = (out / name).read_text()
        assert text.startswith("<svg") and "polyline" in text


def test_simulate_toy6_single_controlled_stays_endemic(tmp_path):
    out = tmp_path / "run"
    assert run(["simulate", "--net", "toy6", "--controlled", "a", "--out", out, "--horizon", 500]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["terminal"] != "extinct"
    assert min(summary["x_limit"][2:]) > 1e-2


def test_outputs_are_byte_identical(tmp_path):
    args = ["simulate", "--net", "random_sc:n=6,seed=2", "--mode", "recovery", "--horizon", 300,
            "--seed", 5]
    assert run(args + ["--out", tmp_path / "a"]) == 0
    assert run(args + ["--out", tmp_path / "b"]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_manifest_round_trip_and_seeded_protocol(tmp_path):
    m = {
        "network": "italy_like:seed=1",
        "mode": "infection",
        "alpha": {"uniform": [0.01, 2.0]},
        "x0": {"num_seeds": 10, "range": [0.2, 0.7]},
        "seed": 42,
        "horizon": 3000.0,
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m))
    manifest = RunManifest.from_dict(m)
    assert RunManifest.from_dict(manifest.to_dict()) == manifest
    out = tmp_path / "out"
    assert run(["simulate", "--manifest", path, "--out", out]) == 0
    summary = json.loads((out / "summary.json").read_text())
    jsonschema.validate(summary, SCHEMA)
    assert summary["terminal"] == "extinct"
    assert 0 < summary["r_infinity"] < 1
    assert summary["r0"] == pytest.approx(2.0, abs=1e-9)
    x0 = [float(v) for v in read_csv(out / "trajectory.csv")[1][1:108]]
    assert sum(v > 0 for v in x0) == 10 and all(v == 0 or 0.2 <= v <= 0.7 for v in x0)
    assert json.loads((out / "manifest.json").read_text())["seed"] == 42


def test_seed_streams_are_independent():
    a, b = seed_streams(1), seed_streams(1)
    assert a["x0"].random() == b["x0"].random()
    assert seed_streams(1)["x0"].random() != seed_streams(1)["alpha"].random()


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("EPISIS_OUT_DIR", str(tmp_path / "env"))
    assert run(["simulate", "--net", "toy6", "--horizon", 50]) == 0
    assert (tmp_path / "env" / "summary.json").exists()


def test_config_errors(tmp_path, monkeypatch):
    monkeypatch.delenv("EPISIS_OUT_DIR", raising=False)
    assert run(["simulate", "--net", "toy6"]) == 2
    assert run(["simulate", "--net", "missing.json", "--out", tmp_path]) == 2
    assert run(["simulate", "--net", "toy6", "--out", tmp_path, "--controlled", "zz"]) == 2
    assert run(["simulate", "--net", "toy6", "--out", tmp_path, "--period", 0.015]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"network": "toy6", "colour": 1}')
    assert run(["simulate", "--manifest", bad, "--out", tmp_path]) == 2
    with pytest.raises(SystemExit) as err:
        main(["simulate", "--mode", "nope"])
    assert err.value.code == 2


def test_integration_failure_exit(tmp_path):
    args = ["simulate", "--net", "toy6", "--mode", "recovery", "--alpha", "400", "--x0", "1",
            "--step", "0.5", "--horizon", 100, "--out", tmp_path]
    assert run(args) == 3


def test_verify_pass_and_tamper(tmp_path):
    out = tmp_path / "run"
    assert run(["simulate", "--net", "toy6", "--out", out, "--horizon", 2000]) == 0
    assert run(["verify", out]) == 0
    summary = json.loads((out / "summary.json").read_text())
    summary["final_gains"] = [0.0] * 6
    (out / "summary.json").write_text(json.dumps(summary))
    assert run(["verify", out]) == 4


def test_verify_recovery_reports(tmp_path, capsys):
    out = tmp_path / "run"
    assert run(["simulate", "--net", "toy6", "--mode", "recovery", "--out", out, "--horizon", 5000]) == 0
    capsys.readouterr()
    assert run(["verify", out]) == 0
    report = json.loads(capsys.readouterr().out)
    tags = {r["tag"] for r in report["bound_checks"]}
    assert {"escape_bound", "recovery_gain_lower_bound"} <= tags


def test_failed_check_exit(tmp_path):
    # floor above any reachable gain forces the positivity check to fail
    m = {"network": "toy6", "horizon": 2000.0, "g_floor": 0.99}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m))
    assert run(["simulate", "--manifest", path, "--out", tmp_path / "o"]) == 4


def test_select(tmp_path, capsys):
    assert run(["select", "--net", "toy6", "--explain", "--out", tmp_path]) == 0
    res = json.loads(capsys.readouterr().out)
    assert "a" in res["controlled"] and len(res["controlled"]) == 2 and res["hurwitz"]
    assert res["cycle_reports"]
    assert (tmp_path / "selection.json").exists()
    assert run(["select", "--net", "random_sc:n=10,density=0.3,seed=4", "--seed", 9]) == 0
    assert json.loads(capsys.readouterr().out)["hurwitz"]


def test_select_infeasible(tmp_path, capsys):
    p = tmp_path / "net.json"
    p.write_text(json.dumps({"d": [1, 1], "b": [[1, 0.5], [0.5, 2]]}))
    assert run(["select", "--net", p]) == 5
    assert "d_i > b_ii" in capsys.readouterr().err


def test_analyze(tmp_path, capsys):
    assert run(["analyze", "--net", "italy_like"]) == 0
    assert json.loads(capsys.readouterr().out)["r0"] == pytest.approx(2.0, abs=1e-9)
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"d": [2], "b": [[1]]}))
    assert run(["analyze", "--net", p]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["r0"] == pytest.approx(0.5) and rep["verdict"] == "disease dies out uncontrolled"
    assert run(["analyze", "--net", "toy6"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["r0"] > 1 and rep["m_matrix_class_of_D_minus_B"] == "not_M"


def test_scenario_export(tmp_path, capsys):
    assert run(["scenario", "export", "toy6", "--out", tmp_path / "toy6.json"]) == 0
    assert run(["analyze", "--net", tmp_path / "toy6.json"]) == 0
    assert run(["scenario", "export", "toy6", "--out", tmp_path, "--format", "edge_csv"]) == 0
    assert (tmp_path / "toy6.csv").exists() and (tmp_path / "toy6_nodes.csv").exists()


def test_batch_manifest(tmp_path):
    m = {
        "defaults": {"network": "toy6", "horizon": 500.0},
        "runs": [{"p": 1}, {"p": 2}, {"mode": "recovery"}],
    }
    path = tmp_path / "batch.json"
    path.write_text(json.dumps(m))
    out = tmp_path / "out"
    assert run(["simulate", "--manifest", path, "--out", out, "--jobs", 2]) == 0
    index = json.loads((out / "batch.json").read_text())
    assert len(index) == 3 and set(index.values()) == {0}
    for key in index:
        assert (out / key / "summary.json").exists()
