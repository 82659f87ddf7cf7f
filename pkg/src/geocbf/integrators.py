"""Fixed-step Runge-Kutta-Munthe-Kaas integration of mechanical systems.

The configuration is advanced as ``retract(q0, u)`` where u is built from
stage velocities mapped through ``dexpinv``; velocities live in a vector
space and take ordinary RK4 updates. On R^n this is classical RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import Divergence
from .mechanics import SMCS, MechState

_A = (0.0, 0.5, 0.5, 1.0)
_B = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)


def _finite(q, v):
    return bool(np.all(np.isfinite(q)) and np.all(np.isfinite(v)))


def rkmk4(s: SMCS, q0, v0, controller, t0, dt, zoh=False, acceleration=None, tau0=None):
    """One RKMK4 step; ``controller(t, q, v) -> tau``. dt may be negative.

    ``acceleration(q, v, tau)`` overrides ``s.acceleration`` (same equation,
    e.g. a specialized kernel). ``tau0`` is the controller output at
    (t0, q0, v0) when the caller already has it.
    """
    m = s.manifold
    accel = acceleration or s.acceleration
    K, Wd = [], []
    for i, a in enumerate(_A):
        if i == 0:
            q, v, u = q0, v0, None
        else:
            u = (dt * a) * K[-1]
            q = m.retract(q0, u)
            v = v0 + (dt * a) * Wd[-1]
        if tau0 is not None and (zoh or i == 0):
            tau = tau0
        else:
            tau = controller(t0 + a * dt, q, v)
            if tau0 is None:
                tau0 = tau
        K.append(v if u is None else m.dexpinv(u, v))
        Wd.append(accel(q, v, tau))
    u = dt * (_B[0] * K[0] + _B[1] * K[1] + _B[2] * K[2] + _B[3] * K[3])
    v1 = v0 + dt * (_B[0] * Wd[0] + _B[1] * Wd[1] + _B[2] * Wd[2] + _B[3] * Wd[3])
    return m.normalize(m.retract(q0, u)), v1


def _constant(tau):
    tau = np.asarray(tau, dtype=float)
    return lambda t, q, v: tau


def step(s: SMCS, st: MechState, tau, dt, t=0.0, zoh=False) -> MechState:
    """Advance by dt > 0. ``tau`` is a coefficient vector or a controller."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    ctrl = tau if callable(tau) else _constant(tau)
    if not callable(tau):
        rows = s.rows(st.q)
        if np.asarray(tau).shape != (rows.shape[0],):
            raise ValueError("tau must have one coefficient per codistribution row")
    # overflow is reported as Divergence below
    with np.errstate(over="ignore", invalid="ignore"):
        q, v = rkmk4(s, st.q, np.asarray(st.v, dtype=float), ctrl, t, dt, zoh)
    if not _finite(q, v):
        raise Divergence(t + dt)
    return MechState(q, v)


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    h: np.ndarray
    h0: np.ndarray
    hdot_margin: np.ndarray
    dt: float
    integrator: str = "rkmk4"
    scenario_hash: str = ""
    diverged: bool = False
    divergence_time: Optional[float] = None

    def __len__(self):
        return len(self.t)

    def state(self, k) -> MechState:
        return MechState(self.q[k], self.v[k])

    @property
    def worst_h_decrease(self):
        """Largest single-step drop in h; diagnostic for discretization."""
        if len(self.h) < 2:
            return 0.0
        return float(max(0.0, -np.min(np.diff(self.h))))


def simulate(s: SMCS, controller: Callable, st0: MechState, dt, T,
             observer: Optional[Callable] = None, zoh=False, scenario_hash="",
             acceleration: Optional[Callable] = None) -> Trajectory:
    """Integrate from st0 for floor(T/dt) steps.

    ``controller(t, q, v) -> tau``. ``observer(q, v, tau) -> (h, h0, margin)``
    is evaluated at every sample. Divergence ends the run early and is
    recorded on the returned trajectory.
    """
    if not (T > 0 and 0 < dt <= T):
        raise ValueError("need T > 0 and 0 < dt <= T")
    n_steps = int(math.floor(T / dt + 1e-9))
    q = s.manifold.validate_point(st0.q)
    v = np.asarray(st0.v, dtype=float)
    ts, qs, vs, taus, obs = [], [], [], [], []
    diverged, t_div = False, None
    for k in range(n_steps + 1):
        t = k * dt
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                tau = np.asarray(controller(t, q, v), dtype=float)
                ob = observer(q, v, tau) if observer else (np.nan, np.nan, np.nan)
        except FloatingPointError:
            # a finite but blown-up state overflowed inside the controller or observer
            diverged, t_div = True, t
            break
        ts.append(t)
        qs.append(q)
        vs.append(v)
        taus.append(tau)
        obs.append(ob)
        if k == n_steps:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            q, v = rkmk4(s, q, v, controller, t, dt, zoh, acceleration, tau)
        if not _finite(q, v):
            diverged, t_div = True, (k + 1) * dt
            break
    obs = np.array(obs, dtype=float).reshape(-1, 3)
    return Trajectory(t=np.array(ts), q=np.array(qs), v=np.array(vs), tau=np.array(taus),
                      h=obs[:, 0], h0=obs[:, 1], hdot_margin=obs[:, 2], dt=dt,
                      scenario_hash=scenario_hash, diverged=diverged, divergence_time=t_div)
