"""Invariant suites behind ``geocbf check``.

Every check draws its own random samples from a fixed seed and compares an
implementation against an independent oracle: finite differences, a
KKT linear-solve QP oracle, conservation laws, closed-form free motion.
The geometry under test comes from a :class:`CheckContext` so a tampered
connection or constraint differential can be injected; see
:func:`mutated_context`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .double_integrator import cylinder_constraint, double_integrator_smcs
from .filters import ControlAffinePointData, barrier_slack, hs_filter, qp_filter
from .integrators import rkmk4, simulate
from .manifold import flat, sharp
from .mechanics import (SMCS, ConfigurationConstraint, MechState, backstepping_cbf,
                        backstepping_h, build_actuation_split, check_underactuation_condition,
                        hdot_terms)
from .satellite import (ACTUATED_E1_E2, ACTUATED_E2_E3, SatelliteLoop, SatelliteParams,
                        heat_shield_constraint)
from .scalar import AlphaSpec, lambda_hs, lambda_hs_grad, lambda_qp
from .so3 import SO3, exp_so3, log_so3, orthonormality_defect, random_rotation

MODULES = ("scalar-filters", "manifold-core", "safety-filters", "mechanical-backstepping",
           "so3-satellite", "integrators")


@dataclass
class CheckContext:
    params: SatelliteParams = field(default_factory=SatelliteParams)
    so3: SO3 = None
    h0: ConfigurationConstraint = None
    quick: bool = False
    seed: int = 12345

    def __post_init__(self):
        if self.so3 is None:
            self.so3 = SO3(self.params.J)
        if self.h0 is None:
            self.h0 = heat_shield_constraint(self.params.theta_safe)

    def rng(self, salt):
        return np.random.default_rng([self.seed, salt])

    def n(self, full, quick):
        return quick if self.quick else full

    def satellite(self, codistribution=ACTUATED_E1_E2):
        s = SMCS(manifold=self.so3, codistribution=codistribution)
        p = self.params
        return s, backstepping_cbf(s, self.h0, epsilon=p.epsilon, alpha=p.alpha, delta=p.delta)


class _FlippedSO3(SO3):
    def connection(self, p, u, v):
        return -super().connection(p, u, v)


def mutated_context(kind, **kwargs) -> CheckContext:
    """A context whose connection ('connection') or dh0 ('dh0') has its sign flipped."""
    ctx = CheckContext(**kwargs)
    if kind == "connection":
        ctx.so3 = _FlippedSO3(ctx.params.J)
    elif kind == "dh0":
        h0 = ctx.h0
        ctx.h0 = ConfigurationConstraint(
            value=h0.value,
            differential=lambda q: -h0.differential(q),
            differential_derivative=lambda q, v: -h0.differential_derivative(q, v))
    else:
        raise ValueError(f"unknown mutation {kind!r}")
    return ctx


@dataclass
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


_REGISTRY = []


def check(module):
    def deco(fn):
        _REGISTRY.append((module, fn.__name__.removeprefix("check_"), fn))
        return fn
    return deco


def registered():
    return [(m, n) for m, n, _ in _REGISTRY]


def run_checks(ctx: CheckContext = None, module=None) -> list[CheckResult]:
    ctx = ctx or CheckContext()
    if module is not None and module not in MODULES:
        raise ValueError(f"unknown module {module!r}; choose from {MODULES}")
    out = []
    for mod, name, fn in _REGISTRY:
        if module is not None and mod != module:
            continue
        start = time.perf_counter()
        try:
            ok, detail = fn(ctx)
        except Exception as exc:  # an oracle that crashes is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out.append(CheckResult(mod, name, bool(ok), detail, time.perf_counter() - start))
    return out


def format_table(results) -> str:
    w_mod = max([len("module")] + [len(r.module) for r in results])
    w_name = max([len("check")] + [len(r.name) for r in results])
    lines = [f"{'module':<{w_mod}}  {'check':<{w_name}}  result  time    detail"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.module:<{w_mod}}  {r.name:<{w_name}}  {status:<6}  {r.seconds:6.2f}s  {r.detail}")
    return "\n".join(lines)


# random problem data shared with the tests

def random_point_data(rng, m=None, zero_row=False):
    """Random control-affine point data with (a, b) in P and linear alpha."""
    m = int(rng.integers(1, 7)) if m is None else m
    A = rng.normal(size=(m, m))
    W = A @ A.T + 0.1 * np.eye(m)
    dhG = np.zeros(m) if zero_row else rng.normal(size=m)
    u_des = rng.normal(size=m) * 3.0
    h = float(rng.uniform(-1.0, 2.0))
    dhf = float(rng.normal() * 3.0)
    if zero_row:
        # b = 0 needs a > 0
        dhf = abs(dhf) + abs(h) + 0.1
    return ControlAffinePointData(dhf=dhf, dhG=dhG, W=W, h=h, u_des=u_des)


def kkt_qp_oracle(d: ControlAffinePointData, alpha: AlphaSpec):
    """Active-set solve of min ||u - u_des||_W^2 s.t. dhG u >= -(dhf + alpha(h)).

    Tries the unconstrained minimizer, otherwise solves the equality-
    constrained KKT system with a dense linear solve.
    """
    rhs = -(d.dhf + alpha(d.h))
    if float(d.dhG @ d.u_des) >= rhs:
        return d.u_des.copy()
    m = d.m
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = d.W
    K[:m, m] = -d.dhG
    K[m, :m] = d.dhG
    sol = np.linalg.solve(K, np.concatenate([d.W @ d.u_des, [rhs]]))
    return sol[:m]


def _w_norm(W, x):
    return math.sqrt(max(0.0, float(x @ W @ x)))


# scalar-filters

@check("scalar-filters")
def check_lambda_gradient_fd(ctx):
    """Analytic partials of lambda_hs against central differences."""
    rng = ctx.rng(1)
    n = ctx.n(10_000, 2_000)
    worst = 0.0
    for _ in range(n):
        a = float(rng.uniform(-5, 5))
        b = float(rng.uniform(0.05, 5))
        ga, gb = lambda_hs_grad(a, b)
        ha, hb = 1e-6 * max(1.0, abs(a)), 1e-6 * b
        fa = (lambda_hs(a + ha, b) - lambda_hs(a - ha, b)) / (2 * ha)
        fb = (lambda_hs(a, b + hb) - lambda_hs(a, b - hb)) / (2 * hb)
        worst = max(worst, abs(fa - ga) / max(abs(ga), 1e-3), abs(fb - gb) / max(abs(gb), 1e-3))
    return worst < 1e-6, f"max rel err {worst:.2e} over {n} points"


@check("scalar-filters")
def check_lambda_properties(ctx):
    """Both multipliers enforce a + b lam >= 0 and lam_hs >= lam_qp >= 0."""
    rng = ctx.rng(2)
    n = ctx.n(10_000, 2_000)
    a = rng.normal(size=n) * 10.0 ** rng.uniform(-6, 3, size=n)
    b = np.abs(rng.normal(size=n)) * 10.0 ** rng.uniform(-6, 3, size=n) + 1e-300
    bad = 0
    for ai, bi in zip(a, b):
        lq, lh = lambda_qp(ai, bi), lambda_hs(ai, bi)
        tol = 1e-12 * max(1.0, abs(ai))
        if not (lq >= 0 and lh >= lq - 1e-15 * lq and ai + bi * lq >= -tol and ai + bi * lh >= -tol):
            bad += 1
    return bad == 0, f"{bad} violations over {n} points"


# safety-filters

@check("safety-filters")
def check_qp_matches_oracle(ctx):
    """Closed-form QP filter against the KKT active-set oracle, in W-norm."""
    rng = ctx.rng(3)
    n = ctx.n(10_000, 2_000)
    alpha = AlphaSpec()
    worst = 0.0
    for i in range(n):
        d = random_point_data(rng, zero_row=(i % 50 == 0))
        u = qp_filter(d, alpha).u
        worst = max(worst, _w_norm(d.W, u - kkt_qp_oracle(d, alpha)))
    return worst < 1e-8, f"max W-norm gap {worst:.2e} over {n} instances"


@check("safety-filters")
def check_filter_constraint(ctx):
    """Filtered inputs satisfy the barrier inequality; hs multiplier dominates."""
    rng = ctx.rng(3)
    n = ctx.n(10_000, 2_000)
    alpha = AlphaSpec()
    worst, dominated = math.inf, 0
    for i in range(n):
        d = random_point_data(rng, zero_row=(i % 50 == 0))
        q, s = qp_filter(d, alpha), hs_filter(d, alpha)
        worst = min(worst, barrier_slack(d, alpha, q.u), barrier_slack(d, alpha, s.u))
        dominated += s.lam < q.lam
    return worst >= -1e-12 and dominated == 0, f"min slack {worst:.2e}, {dominated} with lam_hs < lam_qp"


# manifold-core

def _random_vectors(rng, n, k=3):
    return rng.normal(size=(n, k, 3)) * rng.uniform(0.1, 3.0, size=(n, 1, 1))


@check("manifold-core")
def check_torsion_free(ctx):
    """B(u,v) - B(v,u) equals the frame bracket."""
    rng = ctx.rng(4)
    m = ctx.so3
    worst = 0.0
    for R, (u, v, _) in zip((random_rotation(rng) for _ in range(1000)), _random_vectors(rng, 1000)):
        r = m.connection(R, u, v) - m.connection(R, v, u) - m.bracket(u, v)
        worst = max(worst, np.abs(r).max() / max(1.0, np.abs(u).max() * np.abs(v).max()))
    return worst < 1e-10, f"max residual {worst:.2e}"


@check("manifold-core")
def check_metric_compatibility(ctx):
    """<B(u,v), w> + <v, B(u,w)> vanishes (constant metric in the frame)."""
    rng = ctx.rng(5)
    m = ctx.so3
    worst = 0.0
    for R, (u, v, w) in zip((random_rotation(rng) for _ in range(1000)), _random_vectors(rng, 1000)):
        r = m.inner(R, m.connection(R, u, v), w) + m.inner(R, v, m.connection(R, u, w))
        worst = max(worst, abs(r) / max(1.0, np.abs(u).max() * np.abs(v).max() * np.abs(w).max()))
    return worst < 1e-10, f"max residual {worst:.2e}"


@check("manifold-core")
def check_metric_compatibility_fd(ctx):
    """Product rule d/dt <Y, Z> = <nabla_u Y, Z> + <Y, nabla_u Z> for non-constant fields."""
    rng = ctx.rng(17)
    m = ctx.so3
    a, b, c = rng.normal(size=(3, 3))
    Y = lambda R: R.T @ a + c
    Z = lambda R: R.T @ b
    step, worst = 1e-5, 0.0
    for _ in range(ctx.n(1000, 200)):
        R, u = random_rotation(rng), rng.normal(size=3)
        Rp, Rm = m.retract(R, u, step), m.retract(R, u, -step)
        fd = (m.inner(Rp, Y(Rp), Z(Rp)) - m.inner(Rm, Y(Rm), Z(Rm))) / (2 * step)
        dY = (Y(Rp) - Y(Rm)) / (2 * step) + m.connection(R, u, Y(R))
        dZ = (Z(Rp) - Z(Rm)) / (2 * step) + m.connection(R, u, Z(R))
        an = m.inner(R, dY, Z(R)) + m.inner(R, Y(R), dZ)
        worst = max(worst, abs(fd - an) / max(1.0, abs(an)))
    return worst < 1e-4, f"max rel err {worst:.2e}"


@check("manifold-core")
def check_geodesic_energy(ctx):
    """<u, u> along u' = -B(u, u) integrated with the manifold retraction."""
    m = ctx.so3
    s = SMCS(manifold=m, codistribution=ACTUATED_E1_E2)
    R, w = np.eye(3), np.array([0.3, -1.1, 0.6])
    E0 = m.norm_sq(R, w)
    zero = np.zeros(2)
    for k in range(ctx.n(10_000, 2_000)):
        R, w = rkmk4(s, R, w, lambda t, q, v: zero, k * 1e-3, 1e-3)
    drift = abs(m.norm_sq(R, w) - E0) / E0
    return drift < 1e-6, f"relative drift {drift:.2e}"


@check("manifold-core")
def check_geodesic_is_euler(ctx):
    """-B(w, w) reproduces Euler's free rigid-body equation."""
    rng = ctx.rng(6)
    m = ctx.so3
    J, Jinv = m.J, m.Jinv
    worst = 0.0
    for w in rng.normal(size=(1000, 3)):
        r = -m.connection(None, w, w) - Jinv @ np.cross(J @ w, w)
        worst = max(worst, np.abs(r).max() / max(1.0, w @ w))
    return worst < 1e-10, f"max residual {worst:.2e}"


@check("manifold-core")
def check_flat_sharp_roundtrip(ctx):
    rng = ctx.rng(7)
    m = ctx.so3
    worst = 0.0
    for v in rng.normal(size=(1000, 3)):
        worst = max(worst, np.abs(sharp(m, None, flat(m, None, v)) - v).max())
    return worst < 1e-12, f"max residual {worst:.2e}"


# so3-satellite

@check("so3-satellite")
def check_h0_differential_fd(ctx):
    """dh0 paired with u against central differences of h0 along R exp(t u)."""
    rng = ctx.rng(8)
    m, h0 = ctx.so3, ctx.h0
    worst, step = 0.0, 1e-6
    for _ in range(ctx.n(1000, 300)):
        R, u = random_rotation(rng), rng.normal(size=3)
        fd = (h0(m.retract(R, u, step)) - h0(m.retract(R, u, -step))) / (2 * step)
        worst = max(worst, abs(fd - float(h0.differential(R) @ u)) / max(1.0, abs(fd)))
    return worst < 1e-7, f"max rel err {worst:.2e}"


@check("so3-satellite")
def check_h0_second_derivative_fd(ctx):
    """Derivative of the dh0 coordinates against central differences."""
    rng = ctx.rng(9)
    m, h0 = ctx.so3, ctx.h0
    worst, step = 0.0, 1e-6
    for _ in range(ctx.n(1000, 300)):
        R, v = random_rotation(rng), rng.normal(size=3)
        fd = (h0.differential(m.retract(R, v, step)) - h0.differential(m.retract(R, v, -step))) / (2 * step)
        worst = max(worst, np.abs(fd - h0.differential_derivative(R, v)).max() / max(1.0, np.abs(fd).max()))
    return worst < 1e-7, f"max rel err {worst:.2e}"


@check("so3-satellite")
def check_exp_log_roundtrip(ctx):
    rng = ctx.rng(10)
    worst_log, worst_orth = 0.0, 0.0
    for _ in range(ctx.n(2000, 500)):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        w = axis * rng.uniform(0, math.pi - 1e-3) * (1e-6 if rng.random() < 0.1 else 1.0)
        R = exp_so3(w)
        worst_orth = max(worst_orth, orthonormality_defect(R))
        worst_log = max(worst_log, np.abs(log_so3(R) - w).max())
    ok = worst_log < 1e-9 and worst_orth < 1e-14
    return ok, f"log err {worst_log:.2e}, orthonormality {worst_orth:.2e}"


@check("so3-satellite")
def check_underactuation(ctx):
    """Unactuated directions lie in ker dh0 for e1/e2 torques, not for e2/e3."""
    rng = ctx.rng(11)
    n = ctx.n(10_000, 1_000)
    pts = [random_rotation(rng) for _ in range(n)]
    s, c = ctx.satellite()
    good = check_underactuation_condition(c, s, pts, tol=1e-12)
    s2, c2 = ctx.satellite(ACTUATED_E2_E3)
    bad = check_underactuation_condition(c2, s2, pts[:200], tol=1e-12)
    ok = good.passed and not bad.per_point.any()
    return ok, (f"max |dh0 u| {good.max_abs.max():.2e}; e2/e3 variant fails at "
                f"{int((~bad.per_point).sum())}/{len(bad.per_point)} points")


def _random_satellite_state(rng, theta_safe, max_speed=1.0):
    # attitudes inside the safe cone plus a margin outside it
    polar = rng.uniform(0, theta_safe + 0.2)
    azim = rng.uniform(0, 2 * math.pi)
    R = exp_so3(np.array([math.cos(azim), math.sin(azim), 0.0]) * polar) @ exp_so3(
        np.array([0.0, 0.0, rng.uniform(-math.pi, math.pi)]))
    return R, rng.normal(size=3) * max_speed


@check("so3-satellite")
def check_fast_kernel_agrees(ctx):
    """Scalar satellite kernel against the generic backstepping path."""
    rng = ctx.rng(12)
    s, c = ctx.satellite()
    loop = SatelliteLoop(ctx.params, filter="qp")
    worst = 0.0
    for _ in range(ctx.n(300, 60)):
        R, w = _random_satellite_state(rng, ctx.params.theta_safe)
        t = hdot_terms(c, s, MechState(R, w))
        h, h0, drift, c0, c1 = loop.terms(R, w)
        ref = np.array([t.h, t.h0, t.drift, t.force_direction[0], t.force_direction[1]])
        got = np.array([h, h0, drift, c0, c1])
        worst = max(worst, np.abs(got - ref).max() / max(1.0, np.abs(ref).max()))
    return worst < 1e-10, f"max rel gap {worst:.2e}"


def _body_energy_momentum(m, R, w):
    return 0.5 * float(w @ m.J @ w), R @ (m.J @ w)


@check("so3-satellite")
def check_free_body_conservation(ctx):
    """Kinetic energy and spatial angular momentum along torque-free motion."""
    m = ctx.so3
    s = SMCS(manifold=m, codistribution=ACTUATED_E1_E2)
    R, w = np.eye(3), np.array([1.0, 0.5, 0.2])
    E0, L0 = _body_energy_momentum(m, R, w)
    zero = np.zeros(2)
    ctrl = lambda t, q, v: zero
    for k in range(ctx.n(10_000, 2_000)):
        R, w = rkmk4(s, R, w, ctrl, k * 1e-3, 1e-3)
    E1, L1 = _body_energy_momentum(m, R, w)
    dE = abs(E1 - E0) / E0
    dL = np.linalg.norm(L1 - L0) / np.linalg.norm(L0)
    return dE < 1e-8 and dL < 1e-8, f"energy drift {dE:.2e}, momentum drift {dL:.2e}"


# mechanical-backstepping

def _hdot_fd_errors(s, c, states, tau_fn, step=1e-6):
    """Relative error of analytic hdot against central differences of h along the flow."""
    errs = []
    for st in states:
        tau = tau_fn(st)
        ctrl = lambda t, q, v: tau
        fwd = rkmk4(s, st.q, st.v, ctrl, 0.0, step)
        bwd = rkmk4(s, st.q, st.v, ctrl, 0.0, -step)
        fd = (backstepping_h(c, s, MechState(*fwd)) - backstepping_h(c, s, MechState(*bwd))) / (2 * step)
        t = hdot_terms(c, s, st)
        an = t.drift + float((s.rows(st.q).T @ tau) @ t.force_direction)
        errs.append((an, fd))
    return errs


def _hdot_ok(pairs):
    pairs = np.array(pairs)
    ok = np.isclose(pairs[:, 0], pairs[:, 1], rtol=1e-4, atol=1e-8)
    rel = np.abs(pairs[:, 0] - pairs[:, 1]) / np.maximum(np.abs(pairs[:, 1]), 1e-12)
    return bool(ok.all()), f"{int((~ok).sum())}/{len(ok)} outside tolerance, median rel err {np.median(rel):.1e}"


@check("mechanical-backstepping")
def check_hdot_fd_satellite(ctx):
    """Analytic hdot against central differences of h along satellite flows."""
    rng = ctx.rng(13)
    s, c = ctx.satellite()
    states = [MechState(*_random_satellite_state(rng, ctx.params.theta_safe))
              for _ in range(ctx.n(100, 30))]
    taus = {id(st): rng.normal(size=2) for st in states}
    return _hdot_ok(_hdot_fd_errors(s, c, states, lambda st: taus[id(st)]))


@check("mechanical-backstepping")
def check_hdot_fd_double_integrator(ctx):
    """Same oracle on the flat double integrator with a spring potential."""
    rng = ctx.rng(14)
    s, _ = double_integrator_smcs((1.0, 2.0, 0.5), stiffness=0.7)
    c = backstepping_cbf(s, cylinder_constraint(1.0), epsilon=0.8, alpha=AlphaSpec("cubic", 1.5))
    states = [MechState(rng.normal(size=3) * 0.6, rng.normal(size=3)) for _ in range(ctx.n(100, 30))]
    taus = {id(st): rng.normal(size=2) for st in states}
    return _hdot_ok(_hdot_fd_errors(s, c, states, lambda st: taus[id(st)]))


@check("mechanical-backstepping")
def check_h_below_h0(ctx):
    rng = ctx.rng(15)
    s, c = ctx.satellite()
    worst = -math.inf
    for _ in range(ctx.n(1000, 200)):
        st = MechState(*_random_satellite_state(rng, ctx.params.theta_safe))
        worst = max(worst, backstepping_h(c, s, st) - c.h0(st.q))
    return worst <= 1e-12, f"max h - h0 = {worst:.2e}"


@check("mechanical-backstepping")
def check_actuation_split(ctx):
    """P_A idempotent, g-self-adjoint, and P_U spans ker F."""
    s, _ = ctx.satellite()
    sp = build_actuation_split(s, np.eye(3))
    M, F = ctx.so3.J, s.rows(None)
    idem = np.abs(sp.proj_A @ sp.proj_A - sp.proj_A).max()
    selfadj = np.abs(M @ sp.proj_A - (M @ sp.proj_A).T).max()
    kernel = np.abs(F @ sp.proj_U).max()
    worst = max(idem, selfadj, kernel)
    return worst < 1e-12, f"max residual {worst:.2e}"


# integrators

@check("integrators")
def check_free_spin_exact(ctx):
    """Spin about the symmetry axis follows R0 exp(t w) exactly."""
    m = SO3(ctx.params.J)
    s = SMCS(manifold=m, codistribution=ACTUATED_E1_E2)
    R0 = random_rotation(ctx.rng(16))
    w = np.array([0.0, 0.0, 1.3])
    R, v = R0, w
    worst = 0.0
    zero = np.zeros(2)
    for k in range(1, 1001):
        R, v = rkmk4(s, R, v, lambda t, q, u: zero, 0.0, 1e-3)
        worst = max(worst, np.abs(R - R0 @ exp_so3(w * k * 1e-3)).max())
    return worst < 1e-10, f"max deviation {worst:.2e}"


@check("integrators")
def check_linear_flow_exact(ctx):
    s, _ = double_integrator_smcs()
    x, v = np.array([0.1, -0.2, 0.3]), np.array([1.0, 2.0, -0.5])
    zero = np.zeros(2)
    x1, v1 = rkmk4(s, x, v, lambda t, q, u: zero, 0.0, 0.01)
    err = max(np.abs(x1 - (x + 0.01 * v)).max(), np.abs(v1 - v).max())
    return err < 1e-15, f"error {err:.2e}"


ORDER_SCENARIO = dict(filter="hs", epsilon=2.0, omega=(0.3, -0.2, 0.5))


def richardson_order(params: SatelliteParams, filter="hs", omega=(0.3, -0.2, 0.5), T=3.0,
                     dts=(4e-3, 2e-3, 1e-3)):
    """Observed order from endpoint differences at three halving step sizes."""
    loop = SatelliteLoop(params, filter=filter)
    s = SMCS(manifold=SO3(params.J), codistribution=ACTUATED_E1_E2)
    ends = []
    for dt in dts:
        tr = simulate(s, loop.controller, MechState(np.eye(3), np.array(omega)), dt, T,
                      acceleration=loop.acceleration)
        ends.append(np.concatenate([tr.q[-1].ravel(), tr.v[-1]]))
    e1 = np.linalg.norm(ends[0] - ends[1])
    e2 = np.linalg.norm(ends[1] - ends[2])
    return math.log2(e1 / e2)


@check("integrators")
def check_order_of_accuracy(ctx):
    """Richardson order on a smooth (half-Sontag) closed-loop satellite run."""
    params = replace(ctx.params, epsilon=ORDER_SCENARIO["epsilon"])
    p = richardson_order(params, ORDER_SCENARIO["filter"], ORDER_SCENARIO["omega"],
                         T=ctx.n(3.0, 1.0))
    return 3.5 <= p <= 4.6, f"observed order {p:.3f}"
