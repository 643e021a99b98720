import json
import subprocess
import sys

import numpy as np
import pytest

from convexreg.cli import CONFIG_KEYS, main


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _csv(tmp_path, X, Y, name="data.csv"):
    p = tmp_path / name
    np.savetxt(p, np.column_stack([X, Y]), delimiter=",")
    return str(p)


def test_demo_counterexample(capsys):
    assert main(["demo-counterexample"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["grid"]) == 16
    assert out["fitted_at_zero"] >= 4.9
    assert abs(out["bounded_fit_at_zero"]) <= 1 + 1e-4
    assert "max_abs_gap" in out


def test_rates_schema(tmp_path):
    out = tmp_path / "r.json"
    cfg = _write(tmp_path, "c.json", {
        "version": 1, "domain": {"kind": "polytope", "vertices": [[0.0], [1.0]],
                                 "simplices": [[0, 1]]},
        "truth": {"kind": "quadratic", "Q": [[1.0]]}, "noise_sigma": 1.0,
        "n_grid": [20, 40, 80], "reps": 2, "estimator": {"kind": "blse", "gamma": 2.0},
        "quad_n": 500, "n_jobs": 1})
    assert main(["rates", "--config", cfg, "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert set(doc["exponent"]) == {"c", "d"}
    assert doc["exponent"]["c"]["slope"] is not None


def test_builtin_experiment_with_reps(tmp_path):
    out = tmp_path / "s.json"
    assert main(["simulate", "--experiment", "lse-fixed-d1", "--reps", "1",
                 "-o", str(out)]) == 0
    assert (tmp_path / "s.csv").read_text().startswith("n,norm,rep,loss")


def test_missing_config_exit_2(tmp_path):
    assert main(["fit", "--config", str(tmp_path / "nope.json")]) == 2
    assert main(["fit"]) == 2


def test_unknown_key_and_version_exit_2(tmp_path):
    data = _csv(tmp_path, np.linspace(0, 1, 5), np.zeros(5))
    assert main(["fit", "--config", _write(tmp_path, "a.json",
                 {"version": 1, "data": data, "gama": 1.0})]) == 2
    assert main(["fit", "--config", _write(tmp_path, "b.json",
                 {"version": 2, "data": data})]) == 2


def test_unknown_subcommand_exit_2():
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_domain_error_exit_1(tmp_path):
    data = _csv(tmp_path, np.linspace(0, 2, 5), np.zeros(5))
    cfg = _write(tmp_path, "c.json", {
        "version": 1, "data": data, "gamma": 1.0,
        "domain": {"kind": "polytope", "vertices": [[0.0], [1.0]], "simplices": [[0, 1]]}})
    assert main(["fit", "--config", cfg]) == 1


def test_fit_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.uniform(size=30)
    data = _csv(tmp_path, X, X ** 2 + 0.1 * rng.standard_normal(30))
    cfg = _write(tmp_path, "c.json", {"version": 1, "data": data, "gamma": 2.0})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["fit", "--config", cfg, "-o", str(a)]) == 0
    assert main(["fit", "--config", cfg, "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert len(doc["fit"]["y_hat"]) == 30


def test_fit_set_and_select(tmp_path):
    rng = np.random.default_rng(1)
    th = rng.uniform(0, 2 * np.pi, 200)
    U = np.column_stack([np.cos(th), np.sin(th)])
    V = np.array([[1.0, 0.0], [-0.5, 0.8], [-0.4, -0.9]])
    Y = np.max(U @ V.T, axis=1) + 0.01 * rng.standard_normal(200)
    cfg = _write(tmp_path, "s.json", {"version": 1, "data": _csv(tmp_path, U, Y),
                                      "sigma": 0.01})
    out = tmp_path / "k.json"
    assert main(["fit-set", "--config", cfg, "-o", str(out), "--seed", "3"]) == 0
    assert "vertices" in json.loads(out.read_text())

    x = rng.uniform(size=200)
    y = np.maximum.reduce([0.5 - 1.5 * x, 0 * x, 1.5 * x - 1]) + 0.05 * rng.standard_normal(200)
    cfg = _write(tmp_path, "p.json", {"version": 1, "data": _csv(tmp_path, x, y, "x.csv"),
                                      "sigma": 0.05})
    out = tmp_path / "m.json"
    assert main(["select", "--config", cfg, "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["m_hat"] >= 2


@pytest.mark.parametrize("command", sorted(CONFIG_KEYS))
def test_help_lists_every_key(command):
    res = subprocess.run([sys.executable, "-m", "convexreg", command, "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    for key in CONFIG_KEYS[command]:
        assert key in res.stdout
