import json
import subprocess
import sys

import pytest

from refillmatch.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_text(capsys):
    code, out, err = run(capsys, "constants", "--b0", "1")
    assert code == 0
    assert "cr_bound_th1 = 0.5" in out
    assert "alpha = 0.603" in out and "cr_bound_th2 = 0.7332" in out
    assert '"command": "constants"' in err  # resolved config is logged


def test_constants_json(capsys):
    code, out, _ = run(capsys, "constants", "--b0", "2", "--m", "100", "--format", "json")
    d = json.loads(out)
    assert code == 0 and abs(d["cr_bound_th1"] - 5 / 9) < 1e-12
    assert abs(d["alpha"] - 0.603) < 1e-3 and "cr_bound_th2_detailed" in d


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "stationary", "--K", "x")[0] == 1
    assert run(capsys, "experiment")[0] == 1
    assert run(capsys, "sim")[0] == 1
    assert run(capsys, "stationary", "--a", "-1")[0] == 2


def test_config_rejects_unknown(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"a": 3.0, "colour": "red"}))
    assert run(capsys, "stationary", "--config", str(cfg))[0] == 1


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"a": 3.0, "K": 2}))
    _, out, _ = run(capsys, "stationary", "--config", str(cfg), "--K", "1", "--format", "json")
    d = json.loads(out)
    assert d["a"] == 3.0 and d["K"] == 1


def test_gen_sim_opt_pipeline(tmp_path, capsys):
    inst = tmp_path / "kp.json"
    assert run(capsys, "gen", "--generator", "kp", "-p", "b0=2", "--out", str(inst))[0] == 0
    code, out, _ = run(capsys, "opt", "--instance", str(inst), "--format", "json")
    assert code == 0 and json.loads(out)["opt"] == 18
    code, out, _ = run(capsys, "sim", "--instance", str(inst), "--policy", "balance",
                       "--out", str(tmp_path / "t.csv"), "--format", "json")
    assert code == 0 and json.loads(out)["size"] == 10
    assert (tmp_path / "t.csv").read_text().startswith("t,choice,size")


def test_sim_on_named_adversary(capsys):
    code, out, _ = run(capsys, "sim", "--generator", "theorem1", "-p", "b0=1", "-p", "m=4",
                       "-p", "T=40", "--policy", "balance", "--format", "json")
    assert code == 0 and json.loads(out)["size"] == 11


def test_opt_brute_force(tmp_path, capsys):
    inst = tmp_path / "er.json"
    run(capsys, "gen", "--generator", "erdos_renyi", "-p", "n=4", "-p", "T=10", "-p", "a=2",
        "-p", "beta=0.5", "--seed", "3", "--out", str(inst))
    a = json.loads(run(capsys, "opt", "--instance", str(inst), "--format", "json")[1])["opt"]
    b = json.loads(run(capsys, "opt", "--instance", str(inst), "--method", "brute-force",
                       "--format", "json")[1])["opt"]
    assert a == b


def test_ode_writes_csv(tmp_path, capsys):
    out = tmp_path / "ode.csv"
    code, _, _ = run(capsys, "ode", "--K", "2", "--tau-end", "0.5", "--dt", "0.01", "--out", str(out))
    lines = out.read_text().splitlines()
    assert code == 0 and lines[0] == "tau,h,z0,z1,z2" and len(lines) == 52


def test_experiment_writes_reports(tmp_path, capsys):
    cfg = tmp_path / "er_k1.json"
    cfg.write_text(json.dumps({"generator": "erdos_renyi",
                               "params": {"n": 300, "T": 600, "a": 2, "beta": 0.5, "cap": 1},
                               "policy": "greedy", "replicates": 3, "trajectory": True}))
    outs = []
    for jobs in ("1", "2"):
        d = tmp_path / f"out{jobs}"
        code, out, _ = run(capsys, "experiment", "--config", str(cfg), "--out", str(d),
                           "--emit", "json", "csv", "svg", "--jobs", jobs)
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1]
    assert {"report.json", "report.csv", "report_trajectory.csv", "report_h.svg"} <= set(outs[0])


def test_experiment_sweep(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"generator": "theorem2", "params": {"b0": 1, "m": 5, "T": 500},
                               "policy": "balance", "sweep": {"param": "T", "values": [500, 1000]}}))
    code, _, _ = run(capsys, "experiment", "--config", str(cfg), "--out", str(tmp_path),
                     "--emit", "svg", "json")
    assert code == 0 and (tmp_path / "report_cr.svg").exists()
    assert len(json.loads((tmp_path / "report.json").read_text())["curve"]) == 2


def test_experiment_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"generator": "kp", "params": {"b0": 1}, "replicas": 3}))
    assert run(capsys, "experiment", "--config", str(cfg))[0] == 1


def test_dominance_exit_codes(capsys, monkeypatch):
    code, out, _ = run(capsys, "dominance", "--m", "5", "--T", "1500", "--jobs", "1")
    assert code == 0 and "greedy" in out

    import refillmatch.cli as cli
    from refillmatch.harness import DominanceReport

    monkeypatch.setattr(cli, "dominance_check",
                        lambda *a, **k: DominanceReport(1, 2, 10, 4, [1], {"greedy": [9]}))
    code, _, err = run(capsys, "dominance", "--m", "2", "--T", "10")
    assert code == 3 and "violated" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "refillmatch", "constants", "--format", "json"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["cr_bound_th1"] == pytest.approx(0.5)
