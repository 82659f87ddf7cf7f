import json
import subprocess
import sys

import pytest

from geocbf.cli import main


def write(tmp_path, text, name="scenario.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, "sim.T = 0.5\ninitial.omega = 0.1, 0.2, 0.3\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--filter", "hs", "--csv", "--svg", "--output-dir", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert set(rep) >= {"min_h", "min_h0", "constraint_active_fraction", "max_torque_norm",
                        "divergence_flag", "wall_time"}
    assert rep["filter"] == "hs"
    assert (out / "trajectory.csv").read_text().startswith("t,qw00,")
    assert (out / "h_vs_t.svg").exists() and (out / "sphere_trace.svg").exists()
    assert not list(out.glob(".*tmp"))


def test_run_without_csv_flag_writes_report_only(tmp_path):
    cfg = write(tmp_path, "sim.T = 0.05\n")
    assert main(["run", "--config", cfg, "--output-dir", str(tmp_path / "o")]) == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["report.json"]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GEOCBF_OUTPUT_DIR", str(tmp_path / "env"))
    cfg = write(tmp_path, "sim.T = 0.05\n")
    assert main(["run", "--config", cfg]) == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "filter = maybe\n")
    assert main(["run", "--config", cfg]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_divergence_exit_code(tmp_path):
    # explicit RK4 is unstable for a stiff spring at this step size
    cfg = write(tmp_path, "system = euclidean-double-integrator\nfilter = none\nstiffness = 1e6\n"
                          "initial.position = 0.5, 0, 0\nsim.dt = 0.01\nsim.T = 5\n")
    assert main(["run", "--config", cfg, "--output-dir", str(tmp_path / "o")]) == 3
    assert json.loads((tmp_path / "o" / "report.json").read_text())["divergence_flag"] is True


def test_barrier_violation_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "theta_safe = 0.3\ninitial.attitude = 2.5, 0, 0\nsim.T = 0.1\n")
    assert main(["run", "--config", cfg, "--output-dir", str(tmp_path / "o")]) == 4
    assert main(["run", "--config", cfg, "--filter", "none", "--output-dir", str(tmp_path / "o")]) == 0


def test_check_quick_module_passes(capsys):
    assert main(["check", "--module", "scalar-filters", "--quick"]) == 0
    assert "PASS" in capsys.readouterr().out


@pytest.mark.parametrize("mutation, failing", [("connection", "manifold-core/torsion_free"),
                                               ("dh0", "so3-satellite/h0_differential_fd")])
def test_check_detects_mutations(mutation, failing, capsys):
    module = failing.split("/")[0]
    assert main(["check", "--module", module, "--quick", "--mutate", mutation]) == 1
    assert f"FAILED: {failing}" in capsys.readouterr().err


def test_check_unknown_module():
    assert main(["check", "--module", "nope"]) == 2


def test_sweep(tmp_path):
    cfg = write(tmp_path, "sim.T = 0.3\nfilter = qp\n")
    out = tmp_path / "sw"
    assert main(["sweep", "--param", "epsilon", "--values", "0.1,0.5,2.0", "--config", cfg,
                 "--output-dir", str(out), "--workers", "1"]) == 0
    lines = (out / "sweep_summary.csv").read_text().strip().splitlines()
    assert lines[0] == "value,min_h0,max_torque_norm" and len(lines) == 4
    assert all((out / f"epsilon_{i}" / "report.json").exists() for i in range(3))


@pytest.mark.parametrize("args", [["--param", "kp", "--values", "1"],
                                  ["--param", "epsilon", "--values", "a,b"]])
def test_sweep_bad_arguments(args):
    assert main(["sweep", *args]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "geocbf", "check", "--module", "integrators", "--quick"],
                       capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 0, r.stderr
