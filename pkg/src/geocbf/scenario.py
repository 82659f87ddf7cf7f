"""Scenario configuration, execution, reports and trajectory files.

Config files are flat ``key = value`` text with dotted sections::

    system = satellite
    filter = qp
    alpha.gain = 1.0
    sim.T = 20

Lists are comma separated, ``#`` starts a comment, and dashes in keys are
read as underscores.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .double_integrator import cylinder_constraint, double_integrator_smcs, nominal_pd_point
from .errors import ConfigError
from .integrators import Trajectory, simulate
from .mechanics import MechState, backstepping_cbf, hdot_terms, safe_force_coefficients
from .scalar import AlphaSpec
from .satellite import SatelliteLoop, SatelliteParams, satellite_smcs
from .so3 import exp_so3

SYSTEMS = ("satellite", "euclidean-double-integrator")
FILTERS = ("none", "qp", "hs")
SWEEP_PARAMS = ("epsilon", "delta", "alpha-gain", "theta-safe")
ENV_OUTPUT_DIR = "GEOCBF_OUTPUT_DIR"


@dataclass(frozen=True)
class ScenarioConfig:
    system: str = "satellite"
    inertia: tuple = (1.0, 1.0, 2.0)  # principal inertias, or masses for the double integrator
    stiffness: float = 0.0
    radius: float = 1.0
    theta_safe: float = math.pi / 4
    epsilon: float = 0.5
    delta: float = 0.1
    alpha_kind: str = "linear"
    alpha_gain: float = 1.0
    filter: str = "qp"
    cost: str = "dual"
    kp: float = 4.0
    kd: float = 2.0
    initial_attitude: tuple = (0.0, 0.0, 0.0)
    initial_omega: tuple = (0.0, 0.0, 0.0)
    initial_position: tuple = (0.0, 0.0, 0.0)
    initial_velocity: tuple = (0.0, 0.0, 0.0)
    reference_polar: float = math.pi / 4 + 0.5
    reference_azimuth: float = 0.0
    reference_point: tuple = (2.0, 0.5, 0.0)
    dt: float = 1e-3
    T: float = 20.0
    zoh: bool = False
    seed: int = 0
    output_dir: str = ""

    def __post_init__(self):
        try:
            self._validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def _validate(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"system must be one of {SYSTEMS}, got {self.system!r}")
        if self.filter not in FILTERS:
            raise ValueError(f"filter must be one of {FILTERS}, got {self.filter!r}")
        if self.cost not in ("dual", "euclidean"):
            raise ValueError(f"cost must be dual or euclidean, got {self.cost!r}")
        for name in ("inertia", "initial_attitude", "initial_omega", "initial_position",
                     "initial_velocity", "reference_point"):
            vec = tuple(float(x) for x in getattr(self, name))
            if len(vec) != 3 or not all(math.isfinite(x) for x in vec):
                raise ValueError(f"{name} must be three finite numbers")
            object.__setattr__(self, name, vec)
        if min(self.inertia) <= 0:
            raise ValueError("inertia/mass entries must be positive")
        if self.system == "satellite" and self.inertia[0] != self.inertia[1]:
            raise ValueError("satellite inertia needs J1 == J2")
        for name in ("epsilon", "delta", "alpha_gain", "kp", "kd", "dt", "T", "radius"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val}")
        if not (math.isfinite(self.stiffness) and self.stiffness >= 0):
            raise ValueError("stiffness must be nonnegative")
        if not 0 < self.theta_safe < math.pi:
            raise ValueError("theta_safe must lie in (0, pi)")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        AlphaSpec(self.alpha_kind, self.alpha_gain)

    @property
    def alpha(self):
        return AlphaSpec(self.alpha_kind, self.alpha_gain)

    def satellite_params(self) -> SatelliteParams:
        return SatelliteParams(J=self.inertia, theta_safe=self.theta_safe, epsilon=self.epsilon,
                               delta=self.delta, alpha=self.alpha, kp=self.kp, kd=self.kd,
                               reference_polar=self.reference_polar,
                               reference_azimuth=self.reference_azimuth)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def scenario_hash(self) -> str:
        """Hash of everything that influences the trajectory."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# config key -> (field, parser)
def _floats(text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text):
    return text.strip().strip('"').strip("'")


_KEYS = {
    "system": ("system", _str),
    "inertia": ("inertia", _floats),
    "mass": ("inertia", _floats),
    "stiffness": ("stiffness", float),
    "radius": ("radius", float),
    "theta_safe": ("theta_safe", float),
    "epsilon": ("epsilon", float),
    "delta": ("delta", float),
    "alpha.kind": ("alpha_kind", _str),
    "alpha.gain": ("alpha_gain", float),
    "filter": ("filter", _str),
    "cost": ("cost", _str),
    "gains.kp": ("kp", float),
    "gains.kd": ("kd", float),
    "initial.attitude": ("initial_attitude", _floats),
    "initial.omega": ("initial_omega", _floats),
    "initial.position": ("initial_position", _floats),
    "initial.velocity": ("initial_velocity", _floats),
    "reference.polar": ("reference_polar", float),
    "reference.azimuth": ("reference_azimuth", float),
    "reference.point": ("reference_point", _floats),
    "sim.dt": ("dt", float),
    "sim.t": ("T", float),
    "sim.zoh": ("zoh", _bool),
    "seed": ("seed", int),
    "output_dir": ("output_dir", _str),
}


def parse_config(text: str) -> ScenarioConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name, conv = _KEYS[key]
        if name in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[name] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return ScenarioConfig(**values)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def format_config(cfg: ScenarioConfig) -> str:
    inverse = {}
    for key, (name, _) in _KEYS.items():
        inverse.setdefault(name, key)
    lines = []
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ", ".join(repr(x) for x in val)
        elif isinstance(val, bool):
            val = str(val).lower()
        elif isinstance(val, float):
            val = repr(val)
        key = inverse[f.name].replace("sim.t", "sim.T")
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


@dataclass
class RunReport:
    min_h: float
    min_h0: float
    constraint_active_fraction: float
    max_torque_norm: float
    divergence_flag: bool
    wall_time: float
    worst_h_decrease: float = 0.0
    filter: str = ""
    scenario_hash: str = ""
    divergence_time: float = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=False) + "\n"


def _satellite_setup(cfg: ScenarioConfig):
    params = cfg.satellite_params()
    s, _ = satellite_smcs(params)
    loop = SatelliteLoop(params, filter=cfg.filter, cost=cfg.cost)
    R0 = exp_so3(np.array(cfg.initial_attitude))
    st0 = MechState(R0, np.array(cfg.initial_omega))
    state = {"lam": 0.0}

    def controller(t, R, w):
        tau, lam, _, _ = loop.filtered(R, w, loop.nominal(R, w))
        state["lam"] = lam
        return np.array(tau)

    return s, st0, controller, loop.observer, loop.acceleration, state


def _double_integrator_setup(cfg: ScenarioConfig):
    s, _ = double_integrator_smcs(cfg.inertia, cfg.stiffness)
    cbf = backstepping_cbf(s, cylinder_constraint(cfg.radius), epsilon=cfg.epsilon,
                           alpha=cfg.alpha, delta=cfg.delta)
    st0 = MechState(np.array(cfg.initial_position), np.array(cfg.initial_velocity))
    target = np.array(cfg.reference_point)
    state = {"lam": 0.0}

    def controller(t, x, v):
        st = MechState(x, v)
        tau = nominal_pd_point(cfg.kp, cfg.kd, target, st)
        if cfg.filter == "none":
            state["lam"] = 0.0
            return tau
        tau, out = safe_force_coefficients(cbf, s, st, tau, smooth=cfg.filter == "hs", cost=cfg.cost)
        state["lam"] = out.lam
        return tau

    def observer(x, v, tau):
        t = hdot_terms(cbf, s, MechState(x, v))
        F = s.rows(x).T @ tau
        return t.h, t.h0, t.drift + float(F @ t.force_direction) + cfg.alpha(t.h)

    return s, st0, controller, observer, None, state


def run_scenario(cfg: ScenarioConfig) -> tuple[Trajectory, RunReport]:
    """Simulate a scenario. Diverged runs are reported, not raised."""
    setup = _satellite_setup if cfg.system == "satellite" else _double_integrator_setup
    s, st0, controller, observer, accel, state = setup(cfg)
    active = []

    def watched_observer(q, v, tau):
        # simulate calls the observer right after the controller at each sample
        active.append(state["lam"] > 0)
        return observer(q, v, tau)

    start = time.perf_counter()
    traj = simulate(s, controller, st0, cfg.dt, cfg.T, observer=watched_observer,
                    zoh=cfg.zoh, scenario_hash=cfg.scenario_hash(), acceleration=accel)
    wall = time.perf_counter() - start
    return traj, make_report(traj, active, wall, cfg.filter)


def make_report(traj: Trajectory, active, wall_time, filter_name="") -> RunReport:
    torque = np.linalg.norm(traj.tau, axis=1) if traj.tau.size else np.full(1, np.nan)
    empty = len(traj) == 0
    return RunReport(
        min_h=math.nan if empty else float(np.min(traj.h)),
        min_h0=math.nan if empty else float(np.min(traj.h0)),
        constraint_active_fraction=float(np.mean(active)) if len(active) else 0.0,
        max_torque_norm=float(np.max(torque)),
        divergence_flag=bool(traj.diverged),
        wall_time=float(wall_time),
        worst_h_decrease=traj.worst_h_decrease,
        filter=filter_name,
        scenario_hash=traj.scenario_hash,
        divergence_time=traj.divergence_time,
    )


# trajectory files

def csv_header(traj: Trajectory) -> list[str]:
    q0 = np.asarray(traj.q[0])
    if q0.shape == (3, 3):
        qcols = [f"qw{i}{j}" for i in range(3) for j in range(3)]
    else:
        qcols = [f"x{i}" for i in range(q0.size)]
    vcols = [f"v{i}" for i in range(traj.v.shape[1])]
    tcols = [f"tau{i}" for i in range(traj.tau.shape[1])]
    return ["t", *qcols, *vcols, *tcols, "h", "h0", "hdot_margin"]


def _fmt(x):
    return format(float(x), ".17g")


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(traj))
    n = len(traj)
    qflat = np.asarray(traj.q).reshape(n, -1)
    for k in range(n):
        row = [traj.t[k], *qflat[k], *traj.v[k], *traj.tau[k], traj.h[k], traj.h0[k],
               traj.hdot_margin[k]]
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def trajectory_from_csv(text: str, dt=None, scenario_hash="") -> Trajectory:
    rows = list(csv.reader(io.StringIO(text)))
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    nq = sum(1 for c in header if c.startswith(("qw", "x")))
    nv = sum(1 for c in header if c.startswith("v"))
    ntau = sum(1 for c in header if c.startswith("tau"))
    if header[1:1 + nq] != [c for c in header if c.startswith(("qw", "x"))]:
        raise ValueError("unexpected column order")
    q = data[:, 1:1 + nq]
    if header[1].startswith("qw"):
        q = q.reshape(-1, 3, 3)
    i = 1 + nq
    v, tau = data[:, i:i + nv], data[:, i + nv:i + nv + ntau]
    h, h0, margin = data[:, -3], data[:, -2], data[:, -1]
    t = data[:, 0]
    if dt is None:
        dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    return Trajectory(t=t, q=q, v=v, tau=tau, h=h, h0=h0, hdot_margin=margin, dt=dt,
                      scenario_hash=scenario_hash)


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def resolve_output_dir(cfg: ScenarioConfig, override=None) -> Path:
    """Explicit override, then the config, then $GEOCBF_OUTPUT_DIR, then ./geocbf_out."""
    for cand in (override, cfg.output_dir, os.environ.get(ENV_OUTPUT_DIR)):
        if cand:
            return Path(cand)
    return Path("geocbf_out")


# plots

def write_plots(traj: Trajectory, cfg: ScenarioConfig, out_dir) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    paths = []
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(traj.t, traj.h0, label="h0")
    ax.plot(traj.t, traj.h, label="h", linestyle="--")
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.set_xlabel("t [s]")
    ax.legend()
    ax.set_title(f"filter = {cfg.filter}")
    paths.append(_save_svg(fig, out_dir / "h_vs_t.svg"))
    plt.close(fig)

    if cfg.system == "satellite":
        fig = plt.figure(figsize=(6, 6))
        ax = fig.add_subplot(projection="3d")
        u, v = np.mgrid[0:2 * np.pi:30j, 0:np.pi:15j]
        ax.plot_wireframe(np.cos(u) * np.sin(v), np.sin(u) * np.sin(v), np.cos(v),
                          color="0.85", linewidth=0.4)
        phi = np.linspace(0, 2 * np.pi, 200)
        st, ct = math.sin(cfg.theta_safe), math.cos(cfg.theta_safe)
        ax.plot(st * np.cos(phi), st * np.sin(phi), np.full_like(phi, ct), color="r",
                label="safe-cone boundary")
        z = np.asarray(traj.q)[:, :, 2]  # R e3 is the third column
        ax.plot(z[:, 0], z[:, 1], z[:, 2], color="b", label="R e3")
        ax.set_box_aspect((1, 1, 1))
        ax.legend(loc="upper left")
        paths.append(_save_svg(fig, out_dir / "sphere_trace.svg"))
    else:
        fig, ax = plt.subplots(figsize=(6, 6))
        phi = np.linspace(0, 2 * np.pi, 200)
        ax.plot(cfg.radius * np.cos(phi), cfg.radius * np.sin(phi), color="r", label="h0 = 0")
        x = np.asarray(traj.q)
        ax.plot(x[:, 0], x[:, 1], color="b", label="x1, x2")
        ax.set_aspect("equal")
        ax.legend()
        paths.append(_save_svg(fig, out_dir / "plane_trace.svg"))
    plt.close(fig)
    return paths


def _save_svg(fig, path):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    atomic_write(path, buf.getvalue())
    return path


# sweeps

def sweep_config(cfg: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from {SWEEP_PARAMS}")
    return cfg.replace(**{param.replace("-", "_"): float(value)})


def _sweep_worker(args):
    cfg, param, value = args
    traj, report = run_scenario(sweep_config(cfg, param, value))
    return value, report


def run_sweep(cfg: ScenarioConfig, param: str, values, workers=None):
    """Run one scenario per value in parallel processes; returns reports in order."""
    from concurrent.futures import ProcessPoolExecutor

    for v in values:
        sweep_config(cfg, param, v)  # validate before spawning
    jobs = [(cfg, param, float(v)) for v in values]
    if workers == 1 or len(jobs) == 1:
        return [_sweep_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers or min(len(jobs), os.cpu_count() or 1)) as ex:
        return list(ex.map(_sweep_worker, jobs))


def sweep_summary_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "min_h0", "max_torque_norm"])
    for value, rep in results:
        w.writerow([_fmt(value), _fmt(rep.min_h0), _fmt(rep.max_torque_norm)])
    return buf.getvalue()
