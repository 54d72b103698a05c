import csv
import io
import json
import subprocess
import sys

import pytest

from elift.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_OK, main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list_models(capsys):
    code, out, _ = run(["list-models"], capsys)
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["schema"] == 1
    assert any(m["id"] == "monopole" for m in payload["models"])


def test_simulate_json_and_determinism(capsys):
    argv = ["simulate", "free-particle", "--t-end", "2"]
    code, out1, _ = run(argv, capsys)
    _, out2, _ = run(argv, capsys)
    assert code == EXIT_OK and out1 == out2
    s = json.loads(out1)
    assert s["T"] == 2.0 and s["constraint_drift"] < 1e-10
    assert all(v["drift"] < 1e-9 for v in s["observable_drifts"].values())


def test_simulate_csv_to_stdout(capsys):
    code, out, _ = run(["simulate", "oscillator", "--t-end", "1", "--form", "down", "--format", "csv"], capsys)
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:3] == ["param", "x", "p_x"]
    assert float(rows[-1][0]) == pytest.approx(1.0)


def test_simulate_out_dir(tmp_path, capsys):
    code, _, _ = run(["simulate", "hh", "--regime", "sk", "--t-end", "3", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert (tmp_path / "trajectory.csv").exists()
    assert json.loads((tmp_path / "summary.json").read_text())["model"] == "hh_sk"


def test_verify_free_particle(capsys):
    code, out, _ = run(["verify", "free", "--t-end", "5"], capsys)
    payload = json.loads(out)
    assert code == EXIT_OK, [c for c in payload["checks"] if not c["passed"]]
    assert payload["passed"] and payload["n_failed"] == 0


def test_verify_dot_off_regime(capsys):
    code, out, _ = run(["verify", "quantum-dot", "--tau", "1.37", "--t-end", "20"], capsys)
    payload = json.loads(out)
    assert code == EXIT_OK, [c for c in payload["checks"] if not c["passed"]]
    assert payload["params"]["tau"] == pytest.approx(1.37)


def test_solve_killing(capsys):
    code, out, _ = run(["solve-killing", "free", "--rank", "1", "--poly-degree", "2"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["nullspace_dim"] == 13


def test_bracket_central_charge(capsys):
    code, out, _ = run(["bracket", "free", "--a", "G_x", "--b", "P_x"], capsys)
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["route_disagreement"] < 1e-12
    for st in payload["states"]:
        assert st["down_canonical"] == pytest.approx(-1.0)
        assert st["up_canonical"] == pytest.approx(1.0)  # p̂_v = q = 1 on lifted states


def test_conformal_check_power_map(capsys):
    code, out, _ = run(["conformal-check", "--map", "power", "--map-args", "2", "--t-end", "3"], capsys)
    payload = json.loads(out)
    assert code == EXIT_OK, payload


@pytest.mark.parametrize("argv", [
    ["simulate", "nonexistent"],
    ["simulate", "free", "--bogus", "1"],
    ["simulate", "free", "--state-index", "9"],
    ["verify", "--model-file", "/nonexistent.json"],
    ["solve-killing", "free", "--rank", "7"],
    ["conformal-check", "--map", "fractional_linear", "--map-args", "1", "0", "1", "1"],
    ["conformal-check", "--map", "fractional_linear", "--map-args", "1", "2"],
])
def test_config_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == EXIT_CONFIG
    assert "configuration error" in err


def test_integration_error_exit_code(tmp_path, capsys):
    spec = {"coords": ["x"], "Phi": "-x**4", "domain_box": [[-1, 1]],
            "initial_states": [{"x": [1.0], "p": [3.0]}], "horizon": 10}
    f = tmp_path / "blowup.json"
    f.write_text(json.dumps(spec))
    code, _, err = run(["simulate", "--model-file", str(f), "--form", "down"], capsys)
    assert code == EXIT_INTEGRATION
    assert "integration failed" in err


def test_failed_check_exit_code(tmp_path, capsys):
    # declaring a non-conserved observable as conserved must fail the suite
    spec = {"coords": ["x"], "Phi": "x**2/2", "domain_box": [[-1, 1]],
            "observables": {"X": {"expr": "x"}},
            "initial_states": [{"x": [0.5], "p": [0.0]}], "horizon": 3}
    f = tmp_path / "wrong.json"
    f.write_text(json.dumps(spec))
    code, out, _ = run(["verify", "--model-file", str(f)], capsys)
    assert code == EXIT_CHECK
    assert not json.loads(out)["passed"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "elift", "list-models"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["command"] == "list-models"
