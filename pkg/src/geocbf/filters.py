"""Closed-form CBF safety filters for metric control-affine systems.

Filters work on per-point data in fiber coordinates: the drift pairing
``dh f``, the row ``dh G``, the fiber metric ``W`` and the desired input.
The adjoint ``G* grad h`` is ``W^-1 (dh G)^T`` in these coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutsideDomain
from .manifold import ManifoldModel, riemannian_grad
from .scalar import AlphaSpec, alpha_eval, lambda_hs, lambda_qp


@dataclass(frozen=True)
class ControlAffinePointData:
    dhf: float
    dhG: np.ndarray
    W: np.ndarray
    h: float
    u_des: np.ndarray

    def __post_init__(self):
        dhG = np.atleast_1d(np.asarray(self.dhG, dtype=float))
        u_des = np.atleast_1d(np.asarray(self.u_des, dtype=float))
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        m = dhG.shape[0]
        if dhG.shape != (m,) or u_des.shape != (m,) or W.shape != (m, m):
            raise ValueError("inconsistent input dimensions")
        if not (np.isfinite(self.dhf) and np.isfinite(self.h)
                and np.all(np.isfinite(dhG)) and np.all(np.isfinite(u_des))
                and np.all(np.isfinite(W))):
            raise ValueError("point data must be finite")
        object.__setattr__(self, "dhG", dhG)
        object.__setattr__(self, "u_des", u_des)
        object.__setattr__(self, "W", W)

    @property
    def m(self):
        return self.dhG.shape[0]


@dataclass(frozen=True)
class FilterOutput:
    u: np.ndarray
    lam: float
    a: float
    b: float

    @property
    def active(self):
        return self.lam > 0


def _adjoint_direction(d: ControlAffinePointData):
    if d.m == 1:
        w = float(d.W[0, 0])
        if not w > 0:
            raise np.linalg.LinAlgError("fiber metric is not positive definite")
        return d.dhG / w
    L = np.linalg.cholesky(d.W)  # raises LinAlgError unless SPD
    diag = np.abs(np.diag(L))
    if diag.min() <= 1e-7 * diag.max():
        raise np.linalg.LinAlgError("fiber metric is not invertible to working precision")
    y = np.linalg.solve(L, d.dhG)
    return np.linalg.solve(L.T, y)


def compute_a_b(d: ControlAffinePointData, alpha: AlphaSpec):
    g = _adjoint_direction(d)
    a = alpha_eval(alpha, d.h) + d.dhf + float(d.dhG @ d.u_des)
    b = max(0.0, float(d.dhG @ g))
    return a, b


def _filter(d, alpha, lam_fn):
    g = _adjoint_direction(d)
    a = alpha_eval(alpha, d.h) + d.dhf + float(d.dhG @ d.u_des)
    b = max(0.0, float(d.dhG @ g))
    lam = lam_fn(a, b)
    u = d.u_des + lam * g if lam > 0 else d.u_des.copy()
    return FilterOutput(u=u, lam=lam, a=a, b=b)


def qp_filter(d: ControlAffinePointData, alpha: AlphaSpec) -> FilterOutput:
    """Unique minimizer of ||u - u_des||_W^2 s.t. dhf + dhG u >= -alpha(h)."""
    return _filter(d, alpha, lambda_qp)


def hs_filter(d: ControlAffinePointData, alpha: AlphaSpec) -> FilterOutput:
    """Smooth half-Sontag filter; constraint slack is at least the QP's."""
    return _filter(d, alpha, lambda_hs)


def barrier_slack(d: ControlAffinePointData, alpha: AlphaSpec, u) -> float:
    return d.dhf + float(d.dhG @ u) + alpha_eval(alpha, d.h)


def single_integrator_filter(m: ManifoldModel, p, dh0, h0val, kappa_des, alpha: AlphaSpec,
                             delta=0.0, smooth=True):
    """Safe velocity for q' = u on a Riemannian manifold, plus delta * grad h0.

    The fiber metric of the single integrator is the manifold metric itself.
    """
    dh0 = np.asarray(dh0, dtype=float)
    if h0val <= 0 and not np.any(dh0):
        raise OutsideDomain(f"h0 = {h0val:.6g} <= 0 at a critical point of h0")
    d = ControlAffinePointData(dhf=0.0, dhG=dh0, W=m.metric(p), h=h0val,
                               u_des=np.asarray(kappa_des, dtype=float))
    out = hs_filter(d, alpha) if smooth else qp_filter(d, alpha)
    if delta:
        return out.u + delta * riemannian_grad(m, p, dh0)
    return out.u
