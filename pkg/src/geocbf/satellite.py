"""Underactuated axisymmetric satellite on SO(3).

Torques act about body e1 and e2 only. The heat-shield constraint keeps
the body e3 axis within ``theta_safe`` of the spatial e3 axis:

    h0(R) = e3^T R e3 - cos(theta_safe)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutsideDomain
from .mechanics import SMCS, BacksteppingCBF, ConfigurationConstraint, MechState, backstepping_cbf
from .scalar import AlphaSpec, lambda_hs, lambda_qp
from .so3 import SO3, cross

E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class SatelliteParams:
    J: tuple = (1.0, 1.0, 2.0)
    theta_safe: float = math.pi / 4
    epsilon: float = 0.5
    delta: float = 0.1
    alpha: AlphaSpec = field(default_factory=AlphaSpec)
    kp: float = 4.0
    kd: float = 2.0
    # polar angle and azimuth of the spatial direction the nominal PD tracks
    reference_polar: float = math.pi / 4 + 0.5
    reference_azimuth: float = 0.0

    def __post_init__(self):
        J = tuple(float(x) for x in self.J)
        object.__setattr__(self, "J", J)
        if len(J) != 3 or min(J) <= 0:
            raise ValueError("J must be three positive principal inertias")
        if J[0] != J[1]:
            raise ValueError("J1 must equal J2")
        if not 0 < self.theta_safe < math.pi:
            raise ValueError("theta_safe must lie in (0, pi)")
        for name in ("epsilon", "delta", "kp", "kd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def reference(self):
        return spherical_direction(self.reference_polar, self.reference_azimuth)


def spherical_direction(polar, azimuth=0.0):
    s = math.sin(polar)
    return np.array([s * math.cos(azimuth), s * math.sin(azimuth), math.cos(polar)])


def h0_satellite(R, theta_safe):
    return float(R[2, 2]) - math.cos(theta_safe)


def h0_satellite_differential(R):
    """Body-frame differential: dh0(xi) = xi . (e3 x R^T e3)."""
    gamma = R[2, :]  # R^T e3
    return np.array([-gamma[1], gamma[0], 0.0])


def _h0_differential_derivative(R, v):
    # d/dt R^T e3 along R exp(t v^) is -v x R^T e3
    gamma = R[2, :]
    return -cross(E3, cross(v, gamma))


def heat_shield_constraint(theta_safe) -> ConfigurationConstraint:
    c = math.cos(theta_safe)
    return ConfigurationConstraint(
        value=lambda R: float(R[2, 2]) - c,
        differential=h0_satellite_differential,
        differential_derivative=_h0_differential_derivative,
    )


ACTUATED_E1_E2 = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
ACTUATED_E2_E3 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def satellite_smcs(params: SatelliteParams, codistribution=ACTUATED_E1_E2):
    manifold = SO3(params.J)
    return SMCS(manifold=manifold, codistribution=codistribution), manifold


def satellite_cbf(params: SatelliteParams, smcs: SMCS) -> BacksteppingCBF:
    return backstepping_cbf(smcs, heat_shield_constraint(params.theta_safe),
                            epsilon=params.epsilon, alpha=params.alpha, delta=params.delta)


def nominal_pd(params: SatelliteParams, st: MechState, reference=None):
    """Geometric PD torque about e1, e2 pointing body e3 at a spatial direction.

    With ``b = R^T r`` the reference expressed in the body frame,
    tau_i = -kp (b x e3)_i - kd w_i for i = 1, 2; zero at b = e3, w = 0.
    """
    r = params.reference if reference is None else reference
    b = st.q.T @ r
    w = st.v
    err = cross(b, E3)
    return np.array([-params.kp * err[0] - params.kd * w[0],
                     -params.kp * err[1] - params.kd * w[1]])


class SatelliteLoop:
    """Scalar-arithmetic closed loop for the satellite.

    Evaluates the nominal PD, the backstepping CBF, its hdot terms and the
    force filter with plain floats, which is ~20x faster than the generic
    array path for 3-vectors. Agrees with the generic path to rounding
    (see tests); use the generic functions for anything but long runs.
    """

    def __init__(self, params: SatelliteParams, filter="qp", cost="dual", reference=None):
        if filter not in ("none", "qp", "hs"):
            raise ValueError(f"unknown filter {filter!r}")
        if cost not in ("dual", "euclidean"):
            raise ValueError(f"unknown cost {cost!r}")
        self.params = params
        self.filter = filter
        self.cost = cost
        r = params.reference if reference is None else np.asarray(reference, dtype=float)
        self.reference = (float(r[0]), float(r[1]), float(r[2]))
        self.J1, _, self.J3 = params.J
        self.cos_safe = math.cos(params.theta_safe)
        a = params.alpha
        self._cubic = a.kind == "cubic"
        self._gain = a.gain
        self.d0_margin = 0.5
        # counters for reporting
        self.evaluations = 0
        self.active = 0

    def _alpha(self, r):
        return self._gain * r**3 if self._cubic else self._gain * r

    def _alpha_prime(self, r):
        return 3.0 * self._gain * r * r if self._cubic else self._gain

    def nominal(self, R, w):
        p = self.params
        r0, r1, r2 = self.reference
        # b = R^T r; (b x e3) = (b1, -b0, 0)
        b0 = R[0, 0] * r0 + R[1, 0] * r1 + R[2, 0] * r2
        b1 = R[0, 1] * r0 + R[1, 1] * r1 + R[2, 1] * r2
        return -p.kp * b1 - p.kd * w[0], p.kp * b0 - p.kd * w[1]

    def terms(self, R, w):
        """(h, h0, drift, c0, c1): hdot = drift + c0 tau0 + c1 tau1."""
        p = self.params
        J1, J3 = self.J1, self.J3
        eps, delta = p.epsilon, p.delta
        g0, g1, g2 = float(R[2, 0]), float(R[2, 1]), float(R[2, 2])
        w0, w1, w2 = float(w[0]), float(w[1]), float(w[2])

        h0 = g2 - self.cos_safe
        # dh0 = (-g1, g0, 0), grad h0 = dh0 / J1 on the first two axes
        gx, gy = -g1 / J1, g0 / J1
        bk = (g0 * g0 + g1 * g1) / J1
        ak = self._alpha(h0)
        if bk == 0.0:
            if not ak > 0:
                raise OutsideDomain("safe velocity field undefined at a critical point with h0 <= 0")
            lam, la, lb = 0.0, 0.0, 0.25 / ak
        else:
            s = math.hypot(ak, bk)
            if ak > 0:
                a_plus_s = ak + s
                lam = bk / (2.0 * a_plus_s)
            else:
                a_plus_s = bk * bk / (s - ak)
                lam = (s - ak) / (2.0 * bk)
            den = 2.0 * s * a_plus_s
            la, lb = -bk / den, ak / den
        c = lam + delta
        k0, k1 = c * gx, c * gy  # kappa, third component zero

        # directional derivative of kappa along w
        x0 = w1 * g2 - w2 * g1
        x1 = w2 * g0 - w0 * g2
        d0, d1 = x1, -x0  # derivative of dh0 coordinates: -e3 x (w x gamma)
        Da = self._alpha_prime(h0) * (-g1 * w0 + g0 * w1)
        Db = 2.0 * (gx * d0 + gy * d1)
        s_ = la * Da + lb * Db
        Dk0 = s_ * gx + c * d0 / J1
        Dk1 = s_ * gy + c * d1 / J1

        # nabla_w kappa = D kappa + B(w, kappa); B(u,v) = (u x v + J^-1(u x Jv + v x Ju)) / 2
        nk0, nk1, _ = self._conn(w0, w1, w2, k0, k1, 0.0)
        nk0 += Dk0
        nk1 += Dk1

        e0, e1, e2 = w0 - k0, w1 - k1, w2
        # (nabla_w P_A)(e) = B(w, P_A e) - P_A B(w, e), P_A = diag(1, 1, 0)
        b1x, b1y, _ = self._conn(w0, w1, w2, e0, e1, 0.0)
        b2x, b2y, _ = self._conn(w0, w1, w2, e0, e1, e2)
        dp0, dp1 = b1x - b2x, b1y - b2y

        h = h0 - 0.5 * eps * J1 * (e0 * e0 + e1 * e1)
        drift = (-g1 * w0 + g0 * w1) + eps * J1 * (e0 * (nk0 - dp0) + e1 * (nk1 - dp1))
        return h, h0, drift, -eps * e0, -eps * e1

    def _conn(self, u0, u1, u2, v0, v1, v2):
        J1, J3 = self.J1, self.J3
        # u x v
        c0 = u1 * v2 - u2 * v1
        c1 = u2 * v0 - u0 * v2
        c2 = u0 * v1 - u1 * v0
        # u x Jv + v x Ju
        Jv0, Jv1, Jv2 = J1 * v0, J1 * v1, J3 * v2
        Ju0, Ju1, Ju2 = J1 * u0, J1 * u1, J3 * u2
        s0 = (u1 * Jv2 - u2 * Jv1) + (v1 * Ju2 - v2 * Ju1)
        s1 = (u2 * Jv0 - u0 * Jv2) + (v2 * Ju0 - v0 * Ju2)
        s2 = (u0 * Jv1 - u1 * Jv0) + (v0 * Ju1 - v1 * Ju0)
        return 0.5 * (c0 + s0 / J1), 0.5 * (c1 + s1 / J1), 0.5 * (c2 + s2 / J3)

    def filtered(self, R, w, tau_des):
        """Filter tau_des; returns (tau, lam, a, b)."""
        t0, t1 = tau_des
        if self.filter == "none":
            return (t0, t1), 0.0, math.nan, math.nan
        h, h0, drift, c0, c1 = self.terms(R, w)
        if h0 <= -self.d0_margin:
            raise OutsideDomain(f"h0 = {h0:.6g} is outside the filter domain")
        # W = dual Gram diag(1/J1, 1/J1) or identity
        winv = self.J1 if self.cost == "dual" else 1.0
        a = self._alpha(h) + drift + c0 * t0 + c1 * t1
        b = winv * (c0 * c0 + c1 * c1)
        lam = lambda_hs(a, b) if self.filter == "hs" else lambda_qp(a, b)
        if lam > 0:
            t0 += lam * winv * c0
            t1 += lam * winv * c1
        return (t0, t1), lam, a, b

    def controller(self, t, R, w):
        tau, lam, _, _ = self.filtered(R, w, self.nominal(R, w))
        self.evaluations += 1
        self.active += lam > 0
        return np.array(tau)

    def observer(self, R, w, tau):
        h, h0, drift, c0, c1 = self.terms(R, w)
        return h, h0, drift + c0 * tau[0] + c1 * tau[1] + self._alpha(h)

    def acceleration(self, R, w, tau):
        """Euler's equation J w' = J w x w + (tau0, tau1, 0)."""
        J1, J3 = self.J1, self.J3
        w0, w1, w2 = w
        return np.array([((J1 - J3) * w1 * w2 + tau[0]) / J1,
                         ((J3 - J1) * w2 * w0 + tau[1]) / J1,
                         0.0])
