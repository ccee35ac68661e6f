import csv
import json
import os

import numpy as np
import pytest

from gatefit import cli
from gatefit.circuit import load_circuit, translation_classes


def _config(tmp_path, **overrides):
    cfg = {
        "model": {
            "model": "spinless_fh",
            "L": 4,
            "J": 0.0,
            "U": 4.0,
            "periodic": True,
            "t": 0.5,
            "oracle": "dense",
        },
        "circuit": {"init": {"type": "trotter", "order": 2, "steps": 1}},
        "optimizer": {"max_iterations": 10},
        "execution": {"workers": 1, "parity_mode": False, "translation_dedup": False},
        "output": {"dir": str(tmp_path / "out")},
    }
    for key, val in overrides.items():
        cfg[key] = val
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_optimize_j_zero_converges_at_start(tmp_path, capsys):
    code = cli.main(["optimize", "--config", _config(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["termination"] == "gradient_tolerance"
    assert summary["iterations"] == 1
    assert summary["initial_f"] == pytest.approx(-(2**4), abs=1e-9)


def test_optimize_writes_all_artifacts(tmp_path):
    cfg = _config(tmp_path)
    with open(cfg) as fh:
        doc = json.load(fh)
    doc["model"]["J"] = 1.0
    doc["optimizer"]["max_iterations"] = 3
    with open(cfg, "w") as fh:
        json.dump(doc, fh)
    assert cli.main(["optimize", "--config", cfg]) == 0
    out = tmp_path / "out"
    assert (out / "trace.csv").exists()
    assert (out / "summary.json").exists()
    gates = load_circuit(str(out / "gates.json"))
    assert gates.num_qubits == 4
    with open(out / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and set(rows[0]) == {
        "iter", "f", "error_frobenius", "grad_norm", "radius", "rho",
        "inner_iters", "accepted", "seconds",
    }


def test_optimize_rejects_unknown_keys(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({
        "model": {"model": "spinless_fh", "L": 4, "J": 1.0, "U": 4.0,
                  "periodic": True, "t": 0.5, "frobnicate": 1},
        "circuit": {"init": {"type": "trotter"}},
    }))
    code = cli.main(["optimize", "--config", str(cfg_path)])
    assert code == 2
    err = capsys.readouterr().err
    payload = json.loads(err.strip())
    assert payload["error"]["type"] == "config"
    assert "frobnicate" in payload["error"]["message"]


def test_optimize_rejects_bad_value(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({
        "model": {"model": "heisenberg", "L": 4, "J": 1.0, "U": 4.0,
                  "periodic": True, "t": 0.5},
        "circuit": {"init": {"type": "trotter"}},
    }))
    assert cli.main(["optimize", "--config", str(cfg_path)]) == 2
    assert "model" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_check_commands_pass(capsys):
    assert cli.main(["check", "kernels", "--qubits", "3"]) == 0
    assert cli.main(["check", "gradient", "--qubits", "3", "--layers", "3"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert cli.main(["check", "hessian", "--qubits", "3"]) == 0
    assert cli.main(["check", "hvp", "--qubits", "3"]) == 0


def test_check_rejects_large_instances(capsys):
    assert cli.main(["check", "gradient", "--qubits", "8"]) == 2


def test_bench_kernels_csv_roundtrip(tmp_path):
    code = cli.main([
        "bench", "kernels", "--qubits", "4,6", "--repeats", "2",
        "--out", str(tmp_path),
    ])
    assert code == 0
    with open(tmp_path / "bench.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    assert all(r["schema"] == "bench-v1" for r in rows)
    assert {r["metric"] for r in rows} >= {
        "apply_gate_adjacent_seconds", "hole_contract_seconds", "hole_apply_seconds",
    }
    for r in rows:
        float(r["value"])  # every value parses back


def test_bench_hessian_reports_dedup_pair_counts(tmp_path):
    code = cli.main([
        "bench", "hessian", "--qubits", "4", "--layers", "2", "--repeats", "1",
        "--inits", "1", "--bench-dedup", "--out", str(tmp_path),
    ])
    assert code == 0
    with open(tmp_path / "bench.csv") as fh:
        rows = {r["metric"]: r for r in csv.DictReader(fh) if r["qubits"] == "4"}
    # the dedup-reduced pair count equals the number of translation classes
    rng = np.random.default_rng(12345)
    circ = cli._random_bench_circuit(4, 2, rng)
    classes = translation_classes(circ)
    assert int(rows["pair_contractions"]["value"]) == len(classes) * 2**4


def test_bench_scaling_determinism(tmp_path):
    code = cli.main([
        "bench", "scaling", "--qubits", "6", "--layers", "2", "--repeats", "1",
        "--workers", "1,2,4", "--out", str(tmp_path),
    ])
    assert code == 0
    with open(tmp_path / "bench.csv") as fh:
        rows = [r for r in csv.DictReader(fh) if r["metric"] == "speedup_vs_1"]
    assert len(rows) == 3


def test_workers_env_default(monkeypatch):
    from gatefit.objective import default_workers

    monkeypatch.delenv("RQCO_WORKERS", raising=False)
    assert default_workers() == 1
    monkeypatch.setenv("RQCO_WORKERS", "4")
    assert default_workers() == 4
    monkeypatch.setenv("RQCO_WORKERS", "junk")
    assert default_workers() == 1


def test_sample_config_is_valid():
    cfg = cli.load_config(os.path.join(os.path.dirname(__file__), "..", "configs", "spinless_l6.json"))
    assert cfg["model"]["L"] == 6
