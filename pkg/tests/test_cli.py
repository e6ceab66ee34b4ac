import json
import subprocess
import sys

import pytest

from photothermal.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, ConfigError, ExperimentConfig, main

SMALL = {
    "geometry": {"kind": "circle", "params": {"radius": 2.0}, "n": 64},
    "grid_h": 0.2,
    "sweep": {"omega_min": 1e-3, "omega_max": 1e-2, "count": 3},
    "measurement": {"radius": 3.0, "n_angles": 16},
}


def write_cfg(tmp_path, **over):
    cfg = {**SMALL, **over}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_selftest_default_passes(capsys):
    assert main(["selftest"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_selftest_coarse_and_report(tmp_path):
    assert main(["selftest", "--coarse", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "selftest.json").read_text())
    assert rep["coarse"] and all(c["pass"] for c in rep["checks"])


def test_selftest_detects_injected_fault(capsys):
    assert main(["selftest", "--coarse", "--fault-inject", "gamma_e"]) == EXIT_NUMERIC
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.parametrize("over, field", [
    ({"gamma_c": 1.0}, "gamma_c"),
    ({"grid_h": -0.1}, "grid_h"),
    ({"sweep": {"omega_min": 1e-6, "omega_max": 1e-2, "count": 3}}, "sweep"),
    ({"mode": "exact"}, "mode"),
    ({"geometry": {"kind": "square"}}, "geometry.kind"),
    ({"colour": "red"}, "unknown"),
])
def test_config_errors_name_the_field(over, field):
    with pytest.raises(ConfigError, match=field):
        ExperimentConfig.from_dict({**SMALL, **over})


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["forward", "--config", write_cfg(tmp_path, gamma_c=1.0), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "gamma_c" in capsys.readouterr().err
    assert main(["forward", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad_src = write_cfg(tmp_path, source={"kind": "gaussian", "center": [9.0, 0.0]})
    assert main(["forward", "--config", bad_src, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_forward_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["forward", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["forward", "--config", cfg, "--out", str(b), "--threads", "2"]) == EXIT_OK
    assert (a / "measurements.csv").read_bytes() == (b / "measurements.csv").read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert "measurements.csv" in man["files"]
    header = (a / "measurements.csv").read_text().splitlines()[0]
    assert header == "omega,theta,x1,x2,v,mode"


def test_forward_sign_flip_byte_identical(tmp_path):
    src = {"kind": "gaussian", "center": [0.3, -0.2], "width": 0.4}
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["forward", "--config", write_cfg(tmp_path, source=src), "--out", str(a)]) == EXIT_OK
    assert main(["forward", "--config", write_cfg(tmp_path, source={**src, "scale": -1.0}), "--out", str(b)]) == EXIT_OK
    assert (a / "measurements.csv").read_bytes() == (b / "measurements.csv").read_bytes()
    assert (a / "source.csv").read_bytes() != (b / "source.csv").read_bytes()


def test_sweep_writes_fit(tmp_path):
    cfg = write_cfg(tmp_path, sweep={"omega_min": 1e-4, "omega_max": 1e-2, "count": 10}, mode="asymptotic")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")]) == EXIT_OK
    lines = (tmp_path / "s" / "sweep_fit.csv").read_text().splitlines()
    assert lines[0] == "theta,c_2ln2,c_ln,c_0,residual" and len(lines) == 17


def test_sweep_refuses_narrow_band(tmp_path):
    cfg = write_cfg(tmp_path, sweep={"omega_min": 1e-3, "omega_max": 1.0001e-3, "count": 10}, mode="asymptotic")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")]) == EXIT_NUMERIC


def test_uniqueness_sign_flip(tmp_path):
    pair = {"f1": {"kind": "gaussian", "center": [0.3, -0.2], "width": 0.4}, "relation": "sign-flip"}
    out = tmp_path / "u"
    assert main(["uniqueness", "--config", write_cfg(tmp_path, pair=pair), "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "uniqueness.json").read_text())
    assert rep["admissible"] and all(c["pass"] for c in rep["checks"])
    assert max(rep["per_frequency"]["max_difference"]) == 0.0


def test_uniqueness_rejects_false_relation(tmp_path):
    pair = {"f1": {"kind": "gaussian", "center": [0.3, -0.2]},
            "f2": {"kind": "gaussian", "center": [-0.3, 0.2]}, "relation": "harmonic-diff"}
    assert main(["uniqueness", "--config", write_cfg(tmp_path, pair=pair), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["uniqueness", "--config", write_cfg(tmp_path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_uniqueness_generic_pair_not_admissible(tmp_path):
    pair = {"f1": {"kind": "gaussian", "center": [0.3, -0.2]},
            "f2": {"kind": "gaussian", "center": [-0.3, 0.2]}, "relation": "generic"}
    out = tmp_path / "g"
    cfg = write_cfg(tmp_path, pair=pair, mode="asymptotic")
    assert main(["uniqueness", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert not json.loads((out / "uniqueness.json").read_text())["admissible"]


def test_invert_reports_estimates(tmp_path):
    atoms = [{"kind": "gaussian", "center": c, "width": 0.3} for c in ([0.8, 0.4], [-0.6, -0.7])]
    cfg = write_cfg(tmp_path, mode="asymptotic", atoms=atoms, true_coefficients=[1.0, -0.4],
                    sweep={"omega_min": 1e-3, "omega_max": 1e-2, "count": 10})
    out = tmp_path / "i"
    assert main(["invert", "--config", cfg, "--out", str(out), "--seed", "3"]) == EXIT_OK
    rep = json.loads((out / "invert.json").read_text())
    ti = rep["total_intensity"]
    assert abs(ti["estimate"] - ti["true_abs"]) < 1e-3 * ti["true_abs"]
    assert rep["parametric"]["relative_error"] < 1e-6 and rep["parametric"]["seed"] == 3


def test_invert_needs_coefficients_per_atom(tmp_path):
    cfg = write_cfg(tmp_path, mode="asymptotic", atoms=[{"kind": "constant"}], true_coefficients=[],
                    sweep={"omega_min": 1e-3, "omega_max": 1e-2, "count": 10})
    assert main(["invert", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "photothermal", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "selftest" in r.stdout
