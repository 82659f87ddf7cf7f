"""Backstepping CBFs for simple mechanical control systems.

A configuration constraint h0 on Q and a safe velocity field kappa are
lifted to the tangent bundle as

    h(v_q) = h0(q) - eps/2 * ||(v_q - kappa_q)^A||^2

with ``^A`` the g-orthogonal projection onto the actuated directions.
Forces are covectors; controllers work with their coefficients ``tau``
against the rows of the input codistribution, so ``F = rows^T tau``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import OutsideDomain
from .filters import ControlAffinePointData, FilterOutput, hs_filter, qp_filter, single_integrator_filter
from .manifold import (ManifoldModel, VectorField, covariant_derivative_of_field,
                       covariant_derivative_of_projection, riemannian_grad)
from .scalar import AlphaSpec, alpha_eval, alpha_prime, lambda_hs, lambda_hs_grad

FD_STEP = 1e-6


@dataclass(frozen=True)
class ConfigurationConstraint:
    """Configuration safety specification h0 with its differential.

    ``differential_derivative(q, v)`` is the derivative of the covector's
    frame coordinates along v; optional, enables analytic nabla kappa.
    """

    value: Callable
    differential: Callable
    differential_derivative: Optional[Callable] = None

    def __call__(self, q):
        return self.value(q)


def _zero_potential(q):
    return 0.0


@dataclass(frozen=True)
class SMCS:
    manifold: ManifoldModel
    codistribution: object  # (m, n) array, or callable q -> (m, n) array
    potential: Callable = _zero_potential
    potential_differential: Optional[Callable] = None

    def rows(self, q):
        F = self.codistribution(q) if callable(self.codistribution) else self.codistribution
        return np.atleast_2d(np.asarray(F, dtype=float))

    @property
    def constant_split(self):
        """True when the actuated/unactuated split is constant in the frame."""
        return not callable(self.codistribution) and self.manifold.constant_metric

    @cached_property
    def _split_cache(self):
        return build_actuation_split(self, None)

    def split(self, q):
        if self.constant_split:
            return self._split_cache
        return build_actuation_split(self, q)

    @property
    def m(self):
        if callable(self.codistribution):
            raise AttributeError("rank depends on the configuration")
        return self.rows(None).shape[0]

    def dV(self, q):
        if self.potential_differential is None:
            return np.zeros(self.manifold.dim)
        return np.asarray(self.potential_differential(q), dtype=float)

    def grad_V(self, q):
        return riemannian_grad(self.manifold, q, self.dV(q))

    def dual_gram(self, q):
        F = self.rows(q)
        return F @ self.manifold.metric_inv(q) @ F.T

    def acceleration(self, q, v, tau):
        """Frame coordinates of v' from nabla_v v = -grad V + F^sharp."""
        m = self.manifold
        F = self.rows(q).T @ np.asarray(tau, dtype=float)
        return -m.connection(q, v, v) - self.grad_V(q) + m.metric_inv(q) @ F


@dataclass(frozen=True)
class MechState:
    q: object
    v: np.ndarray


@dataclass(frozen=True)
class ActuationSplit:
    proj_A: np.ndarray
    proj_U: np.ndarray


def build_actuation_split(s: SMCS, q) -> ActuationSplit:
    F = s.rows(q)
    n = s.manifold.dim
    if F.shape[1] != n:
        raise ValueError("codistribution rows must have length dim Q")
    if np.linalg.matrix_rank(F) < F.shape[0]:
        raise ValueError("input codistribution is rank deficient")
    Minv = s.manifold.metric_inv(q)
    # range(Minv F^T) is the g-orthogonal complement of ker F
    S = F @ Minv @ F.T
    proj_A = Minv @ F.T @ np.linalg.solve(S, F)
    return ActuationSplit(proj_A=proj_A, proj_U=np.eye(n) - proj_A)


def safe_velocity_field(m: ManifoldModel, h0: ConfigurationConstraint, alpha: AlphaSpec,
                        delta=0.1, smooth=True) -> VectorField:
    """kappa = single-integrator half-Sontag filter of zero + delta * grad h0."""

    def kappa(q):
        return single_integrator_filter(m, q, h0.differential(q), h0.value(q),
                                        np.zeros(m.dim), alpha, delta=delta, smooth=smooth)

    if not (smooth and m.constant_metric and h0.differential_derivative is not None):
        return VectorField(kappa)

    Minv = m.metric_inv(None)

    def kappa_derivative(q, v):
        dh = h0.differential(q)
        h = h0.value(q)
        g = Minv @ dh
        Ddh = h0.differential_derivative(q, v)
        a = alpha_eval(alpha, h)
        b = float(dh @ g)
        if h <= 0 and b == 0:
            raise OutsideDomain("safe velocity field undefined at a critical point with h0 <= 0")
        lam = lambda_hs(a, b)
        la, lb = lambda_hs_grad(a, b)
        Da = alpha_prime(alpha, h) * float(dh @ v)
        Db = 2.0 * float(g @ Ddh)
        return (la * Da + lb * Db) * g + (lam + delta) * (Minv @ Ddh)

    return VectorField(kappa, kappa_derivative)


@dataclass(frozen=True)
class BacksteppingCBF:
    h0: ConfigurationConstraint
    kappa: VectorField
    epsilon: float = 0.5
    alpha: AlphaSpec = field(default_factory=AlphaSpec)
    delta: float = 0.1
    d0_margin: float = 0.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def backstepping_cbf(s: SMCS, h0: ConfigurationConstraint, epsilon=0.5, alpha=None,
                     delta=0.1, d0_margin=0.5) -> BacksteppingCBF:
    alpha = alpha or AlphaSpec()
    kappa = safe_velocity_field(s.manifold, h0, alpha, delta)
    return BacksteppingCBF(h0, kappa, epsilon, alpha, delta, d0_margin)


def _proj_A_derivative(s, q, v):
    if s.constant_split:
        return None
    m = s.manifold
    fwd = build_actuation_split(s, m.retract(q, v, FD_STEP)).proj_A
    bwd = build_actuation_split(s, m.retract(q, v, -FD_STEP)).proj_A
    return (fwd - bwd) / (2 * FD_STEP)


def _validate(s, st):
    v = np.asarray(st.v, dtype=float)
    if v.shape != (s.manifold.dim,) or not np.all(np.isfinite(v)):
        raise ValueError("velocity must be a finite vector of length dim Q")
    return v


def backstepping_h(c: BacksteppingCBF, s: SMCS, st: MechState) -> float:
    v = _validate(s, st)
    q = st.q
    e = v - c.kappa(q)
    eA = s.split(q).proj_A @ e
    return c.h0(q) - 0.5 * c.epsilon * s.manifold.norm_sq(q, eA)


@dataclass(frozen=True)
class HdotTerms:
    """hdot(F) = drift + F . force_direction, with h and h0 at the same state."""

    h: float
    h0: float
    drift: float
    force_direction: np.ndarray  # -eps * e^A, paired with force covectors


def hdot_terms(c: BacksteppingCBF, s: SMCS, st: MechState) -> HdotTerms:
    m = s.manifold
    q = st.q
    v = _validate(s, st)
    proj_A = s.split(q).proj_A
    e = v - c.kappa(q)
    eA = proj_A @ e
    h0 = c.h0(q)
    M = m.metric(q)
    h = h0 - 0.5 * c.epsilon * float(eA @ M @ eA)
    inner = (covariant_derivative_of_field(m, q, v, c.kappa) + s.grad_V(q)
             - covariant_derivative_of_projection(m, q, v, proj_A, e, _proj_A_derivative(s, q, v)))
    drift = float(c.h0.differential(q) @ v) + c.epsilon * float(eA @ M @ inner)
    return HdotTerms(h=h, h0=h0, drift=drift, force_direction=-c.epsilon * eA)


def _check_in_span(s, q, F, tol=1e-10):
    rows = s.rows(q)
    tau, *_ = np.linalg.lstsq(rows.T, F, rcond=None)
    if np.abs(rows.T @ tau - F).max() > tol * max(1.0, np.abs(F).max()):
        raise ValueError("force is not in the span of the input codistribution")
    return tau


def hdot(c: BacksteppingCBF, s: SMCS, st: MechState, F) -> float:
    F = np.asarray(F, dtype=float)
    _check_in_span(s, st.q, F)
    t = hdot_terms(c, s, st)
    return t.drift + float(F @ t.force_direction)


@dataclass
class UnderactuationReport:
    passed: bool
    per_point: np.ndarray
    max_abs: np.ndarray

    def __bool__(self):
        return self.passed


def check_underactuation_condition(c: BacksteppingCBF, s: SMCS, points, tol=1e-10):
    """Check that every unactuated direction lies in ker d(h0) at each point."""
    per_point, worst = [], []
    for q in points:
        U = scipy.linalg.null_space(s.rows(q))
        val = np.abs(c.h0.differential(q) @ U).max() if U.size else 0.0
        worst.append(val)
        per_point.append(val < tol)
    per_point = np.array(per_point, dtype=bool)
    return UnderactuationReport(bool(per_point.all()), per_point, np.array(worst))


def force_point_data(c: BacksteppingCBF, s: SMCS, st: MechState, tau_des, cost="dual"):
    """Per-point filter data for the force coefficients tau."""
    t = hdot_terms(c, s, st)
    rows = s.rows(st.q)
    if cost == "dual":
        W = s.dual_gram(st.q)
    elif cost == "euclidean":
        W = np.eye(rows.shape[0])
    else:
        raise ValueError(f"unknown cost {cost!r}")
    d = ControlAffinePointData(dhf=t.drift, dhG=rows @ t.force_direction, W=W, h=t.h,
                               u_des=np.asarray(tau_des, dtype=float))
    return d, t


def safe_force_coefficients(c: BacksteppingCBF, s: SMCS, st: MechState, tau_des,
                            smooth=False, cost="dual") -> tuple[np.ndarray, FilterOutput]:
    h0 = c.h0(st.q)
    if h0 <= -c.d0_margin:
        raise OutsideDomain(f"h0 = {h0:.6g} is outside the filter domain")
    d, _ = force_point_data(c, s, st, tau_des, cost)
    out = hs_filter(d, c.alpha) if smooth else qp_filter(d, c.alpha)
    return out.u, out


def safe_force(c: BacksteppingCBF, s: SMCS, st: MechState, F_des, smooth=False, cost="dual"):
    """Filtered force covector; guarantees hdot >= -alpha(h)."""
    tau_des = _check_in_span(s, st.q, np.asarray(F_des, dtype=float))
    tau, _ = safe_force_coefficients(c, s, st, tau_des, smooth, cost)
    return s.rows(st.q).T @ tau
