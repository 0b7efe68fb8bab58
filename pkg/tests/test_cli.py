import json
import subprocess
import sys

import pytest

from normsol import cli
from normsol.errors import ConfigError, StructureViolation

BASE = """# minimal subcritical instance
N = 3
p = 2.5
alpha = 3
beta = 3
nu = 1
a = 0.1
b = 0.1
scenario = ground-state
"""


def _cfg(text, tmp_path, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_minimal():
    cfg = cli.parse_config(BASE)
    assert cfg.params.a == 0.1 and cfg.scenario == "ground-state"
    assert cfg.solver["budget"] == 50000 and cfg.grid["M"] == "auto"
    assert cfg.to_dict()["params"]["N"] == 3


@pytest.mark.parametrize("text,line,words", [
    (BASE + "colour = red\n", 10, "unknown key"),
    (BASE + "budget = lots\n", 10, "cannot parse"),
    (BASE + "a = 0.2\n", 10, "duplicate"),
    (BASE + "just words\n", 10, "key=value"),
    (BASE.replace("beta = 3", "beta = 2"), 4, "alpha + beta = 2*"),
    (BASE.replace("ground-state", "hover"), 9, "cannot parse"),
])
def test_parse_errors_carry_line_numbers(text, line, words):
    with pytest.raises(ConfigError) as exc:
        cli.parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value) and words in str(exc.value)


def test_missing_key():
    with pytest.raises(ConfigError, match="missing required key 'nu'"):
        cli.parse_config(BASE.replace("nu = 1\n", ""))


def test_critical_low_dimension_rejected():
    text = "N = 4\np = 4\nalpha = 2\nbeta = 2\nnu = 1\na = 1\nb = 1\nscenario = critical\n"
    with pytest.raises(ConfigError) as exc:
        cli.parse_config(text)
    assert exc.value.line == 8 and "nonexistence" in str(exc.value)


def test_scenario_regime_mismatch():
    with pytest.raises(ConfigError, match="mass-subcritical"):
        cli.parse_config(BASE.replace("p = 2.5", "p = 4"))
    with pytest.raises(ConfigError, match="smallness"):
        cli.parse_config(BASE.replace("a = 0.1", "a = 1000"))
    with pytest.raises(ConfigError, match="probe suite"):
        cli.parse_config(BASE.replace("ground-state", "verify") + "suite = probe\n")


def test_ground_state_run_is_deterministic(tmp_path):
    cfg = _cfg(BASE, tmp_path)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert cli.main([ "--config", cfg, "--out", str(out)]) == 0
        outs.append((out / "result.json").read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert set(doc) == {"config", "result", "checks"}
    assert doc["result"]["report"]["converged"] and doc["config"]["params"]["a"] == 0.1
    assert all(c["passed"] for c in doc["checks"])
    assert (tmp_path / "o0" / "profiles.csv").read_text().startswith("r,u,v\n")


def test_scenario_override_and_fiber_scan(tmp_path):
    cfg = _cfg(BASE, tmp_path)
    assert cli.main(["fiber-scan", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "fiber_scan.csv").read_text().splitlines()
    assert rows[0] == "t,phi,dphi,d2phi" and len(rows) == 202
    assert all(len(r.split(",")) == 4 for r in rows[1:])
    doc = json.loads((tmp_path / "result.json").read_text())
    assert len(doc["result"]["fiber"]["roots"]) == 2


@pytest.mark.parametrize("scenario", ["constants", "scalar"])
def test_light_scenarios(tmp_path, scenario):
    assert cli.main([scenario, "--config", _cfg(BASE, tmp_path), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "result.json").read_text())
    assert doc["result"]


def test_structure_violation_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise StructureViolation("expected max, found min,max")

    monkeypatch.setattr("normsol.fiber.fiber_critical_points", boom)
    assert cli.main(["fiber-scan", "--config", _cfg(BASE, tmp_path), "--out", str(tmp_path)]) == 2
    assert "StructureViolation" in json.loads((tmp_path / "result.json").read_text())["error"]


def test_contradiction_exit_code(tmp_path, monkeypatch):
    from normsol import verify

    def fake(params, seeds, grid=None, budget=200):
        return verify.CheckResult("probe", "ref", False, 1.0, 0.0, 0.0, verify.CONTRADICTION + ": fake")

    monkeypatch.setattr(verify, "nonexistence_probe", fake)
    text = BASE.replace("ground-state", "verify") + "omega1 = -1\nomega2 = -1\nsuite = probe\n"
    assert cli.main(["--config", _cfg(text, tmp_path), "--out", str(tmp_path)]) == 2


def test_operational_error_exit_code(tmp_path):
    assert cli.main(["--config", str(tmp_path / "missing.cfg")]) == 1
    text = BASE + "budget = 1\ntol = 1e-30\n"
    assert cli.main(["--config", _cfg(text, tmp_path), "--out", str(tmp_path)]) == 1
    doc = json.loads((tmp_path / "result.json").read_text())
    assert "BudgetError" in doc["error"] and doc["result"]["report"]["iterations"] == 1


def test_sweep(tmp_path):
    text = BASE.replace("ground-state", "sweep") + "sweep_a = 0.1, 0.2, 0.3\nsweep_b = 0.1, 0.2, 0.3\n"
    assert cli.main(["--config", _cfg(text, tmp_path), "--out", str(tmp_path), "--threads", "2"]) == 0
    doc = json.loads((tmp_path / "result.json").read_text())
    assert len(doc["result"]["cells"]) == 9
    assert len(list(tmp_path.glob("sweep_a*_b*.json"))) == 9
    mono = [c for c in doc["checks"] if c["name"] == "mass_monotonicity"]
    assert len(mono) == 1 and mono[0]["passed"]


def test_verify_structure_suite(tmp_path):
    text = BASE.replace("ground-state", "verify") + "suite = structure\nn_samples = 20\n"
    assert cli.main(["--config", _cfg(text, tmp_path), "--out", str(tmp_path)]) == 0


def test_console_entry_point(tmp_path):
    cfg = _cfg(BASE, tmp_path)
    r = subprocess.run([sys.executable, "-m", "normsol", "constants", "--config", cfg, "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
