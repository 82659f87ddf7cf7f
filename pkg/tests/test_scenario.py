import json
import math

import numpy as np
import pytest

from geocbf.errors import ConfigError
from geocbf.scenario import (ScenarioConfig, csv_header, format_config, parse_config, resolve_output_dir,
                             run_scenario, run_sweep, sweep_config, sweep_summary_csv,
                             trajectory_from_csv, trajectory_to_csv, write_plots)

SHORT = ScenarioConfig(T=1.0, initial_omega=(0.2, -0.4, 0.3))


def test_defaults_match_documented_values():
    c = ScenarioConfig()
    assert c.inertia == (1.0, 1.0, 2.0) and c.theta_safe == math.pi / 4
    assert (c.epsilon, c.delta, c.kp, c.kd, c.dt, c.T) == (0.5, 0.1, 4.0, 2.0, 1e-3, 20.0)
    assert c.reference_polar == pytest.approx(c.theta_safe + 0.5)


def test_parse_config():
    text = """
    # satellite, smooth filter
    system = satellite
    filter = hs
    alpha.kind = cubic
    alpha.gain = 2.5
    gains.kp = 3
    initial.omega = 0.1, 0.2, 0.3
    theta-safe = 0.9
    sim.T = 4   # seconds
    sim.zoh = true
    """
    c = parse_config(text)
    assert c.filter == "hs" and c.alpha.kind == "cubic" and c.alpha.gain == 2.5
    assert c.kp == 3.0 and c.initial_omega == (0.1, 0.2, 0.3)
    assert c.theta_safe == 0.9 and c.T == 4.0 and c.zoh


def test_format_parse_roundtrip():
    c = ScenarioConfig(system="euclidean-double-integrator", inertia=(1.0, 2.0, 3.0), filter="none",
                       reference_point=(3.0, 0.1, -1.0), stiffness=0.3, T=0.1 + 0.2)
    assert parse_config(format_config(c)) == c


@pytest.mark.parametrize("text", [
    "filter = bogus",
    "system = pendulum",
    "theta_safe = 3.5",
    "epsilon = -1",
    "inertia = 1, 2, 3",
    "inertia = 1, 1",
    "sim.dt = 2\nsim.T = 1",
    "alpha.kind = atan",
    "unknown.key = 1",
    "filter qp",
    "epsilon = abc",
    "filter = qp\nfilter = hs",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_scenario_hash_ignores_output_dir_only():
    a = ScenarioConfig()
    assert a.scenario_hash() == a.replace(output_dir="/tmp/x").scenario_hash()
    assert a.scenario_hash() != a.replace(seed=1).scenario_hash()
    assert a.scenario_hash() != a.replace(epsilon=0.4).scenario_hash()


def test_output_dir_resolution(monkeypatch, tmp_path):
    monkeypatch.delenv("GEOCBF_OUTPUT_DIR", raising=False)
    c = ScenarioConfig()
    assert str(resolve_output_dir(c)) == "geocbf_out"
    monkeypatch.setenv("GEOCBF_OUTPUT_DIR", str(tmp_path / "env"))
    assert resolve_output_dir(c) == tmp_path / "env"
    assert str(resolve_output_dir(c.replace(output_dir="cfg"))) == "cfg"
    assert str(resolve_output_dir(c.replace(output_dir="cfg"), "cli")) == "cli"


@pytest.mark.parametrize("filt", ["none", "qp", "hs"])
def test_report_invariants(filt):
    traj, rep = run_scenario(SHORT.replace(filter=filt))
    assert rep.min_h <= rep.min_h0 + 1e-12
    assert np.isfinite(rep.max_torque_norm) and not rep.divergence_flag
    assert 0.0 <= rep.constraint_active_fraction <= 1.0
    assert len(traj) == 1001 and traj.scenario_hash == SHORT.replace(filter=filt).scenario_hash()
    if filt == "none":
        assert rep.constraint_active_fraction == 0.0
    json.loads(rep.to_json())


def test_csv_header_exact():
    traj, _ = run_scenario(SHORT.replace(T=0.01))
    assert ",".join(csv_header(traj)) == (
        "t,qw00,qw01,qw02,qw10,qw11,qw12,qw20,qw21,qw22,v0,v1,v2,tau0,tau1,h,h0,hdot_margin")
    traj, _ = run_scenario(ScenarioConfig(system="euclidean-double-integrator", T=0.01, dt=0.01))
    assert ",".join(csv_header(traj)) == "t,x0,x1,x2,v0,v1,v2,tau0,tau1,h,h0,hdot_margin"


@pytest.mark.parametrize("system", ["satellite", "euclidean-double-integrator"])
def test_csv_roundtrip_full_precision(system):
    cfg = ScenarioConfig(system=system, T=0.2, dt=1e-2, initial_omega=(0.3, 0.1, -2.0),
                         initial_velocity=(0.5, -0.2, 1.0))
    traj, _ = run_scenario(cfg)
    back = trajectory_from_csv(trajectory_to_csv(traj))
    for name in ("t", "q", "v", "tau", "h", "h0", "hdot_margin"):
        assert np.array_equal(getattr(back, name), getattr(traj, name)), name
    assert back.dt == pytest.approx(traj.dt)


def test_identical_config_identical_csv_bytes():
    a = trajectory_to_csv(run_scenario(SHORT)[0])
    b = trajectory_to_csv(run_scenario(SHORT)[0])
    assert a == b


def test_double_integrator_filtered_run_is_safe():
    cfg = ScenarioConfig(system="euclidean-double-integrator", T=4.0, dt=1e-2, stiffness=0.5,
                         initial_velocity=(0.5, 0.0, 0.3))
    _, unsafe = run_scenario(cfg.replace(filter="none"))
    assert unsafe.min_h0 < 0
    for filt in ("qp", "hs"):
        _, rep = run_scenario(cfg.replace(filter=filt))
        assert rep.min_h >= -1e-6 and rep.min_h0 >= -1e-6


def test_sweep_summary_rows(tmp_path):
    cfg = SHORT.replace(T=0.5)
    results = run_sweep(cfg, "epsilon", [0.1, 0.5, 2.0], workers=2)
    text = sweep_summary_csv(results)
    lines = text.strip().splitlines()
    assert lines[0] == "value,min_h0,max_torque_norm" and len(lines) == 4
    assert [v for v, _ in results] == [0.1, 0.5, 2.0]


@pytest.mark.parametrize("param, field", [("epsilon", "epsilon"), ("delta", "delta"),
                                          ("alpha-gain", "alpha_gain"), ("theta-safe", "theta_safe")])
def test_sweep_config(param, field):
    assert getattr(sweep_config(ScenarioConfig(), param, 0.7), field) == 0.7


def test_sweep_unknown_param():
    with pytest.raises(ConfigError):
        sweep_config(ScenarioConfig(), "kp", 1.0)


@pytest.mark.parametrize("system", ["satellite", "euclidean-double-integrator"])
def test_plots_are_svg(tmp_path, system):
    cfg = ScenarioConfig(system=system, T=0.1, dt=1e-2)
    traj, _ = run_scenario(cfg)
    paths = write_plots(traj, cfg, tmp_path)
    assert len(paths) == 2
    for p in paths:
        assert p.read_text().lstrip().startswith("<?xml") and "<svg" in p.read_text()
