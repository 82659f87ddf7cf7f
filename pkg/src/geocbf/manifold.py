"""Riemannian manifolds presented in one global frame.

Tangent vectors are plain length-``dim`` arrays in a fixed frame (standard
basis on R^n, body coordinates on SO(3)). The Levi-Civita connection is
carried as a bilinear map ``connection(p, u, v)`` so that the covariant
derivative of a field Y along u reads

    nabla_u Y = D Y(p)[u] + connection(p, u, Y(p))

where ``D Y(p)[u]`` differentiates the coordinate function of Y along the
curve ``t -> retract(p, u, t)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

FD_STEP = 1e-6


class ManifoldModel:
    """Base class; subclasses fill in the point-dependent pieces."""

    dim: int
    constant_metric = False

    def metric(self, p) -> np.ndarray:
        raise NotImplementedError

    def metric_inv(self, p) -> np.ndarray:
        return np.linalg.inv(self.metric(p))

    def connection(self, p, u, v) -> np.ndarray:
        raise NotImplementedError

    def retract(self, p, u, t=1.0):
        raise NotImplementedError

    def bracket(self, u, v) -> np.ndarray:
        """Lie bracket of the frame fields, so torsion-freeness reads
        connection(p,u,v) - connection(p,v,u) == bracket(u,v)."""
        return np.zeros(self.dim)

    def dexpinv(self, u, w) -> np.ndarray:
        """Inverse left-trivialized differential of the retraction at u."""
        return w

    def normalize(self, p):
        """Pull a point back onto the manifold after accumulated rounding."""
        return p

    def validate_point(self, p):
        return p

    def random_point(self, rng):
        raise NotImplementedError

    def inner(self, p, u, v) -> float:
        return float(u @ self.metric(p) @ v)

    def norm_sq(self, p, u) -> float:
        return self.inner(p, u, u)


class Euclidean(ManifoldModel):
    """R^n with a constant metric and the flat connection."""

    constant_metric = True

    def __init__(self, dim, metric=None):
        self.dim = int(dim)
        M = np.eye(self.dim) if metric is None else np.array(metric, dtype=float)
        if M.shape != (self.dim, self.dim):
            raise ValueError(f"metric must be {self.dim}x{self.dim}")
        if not np.allclose(M, M.T) or np.linalg.eigvalsh(M).min() <= 0:
            raise ValueError("metric must be symmetric positive definite")
        self._M = M
        self._Minv = np.linalg.inv(M)

    def metric(self, p):
        return self._M

    def metric_inv(self, p):
        return self._Minv

    def connection(self, p, u, v):
        return np.zeros(self.dim)

    def retract(self, p, u, t=1.0):
        return np.asarray(p, dtype=float) + t * np.asarray(u, dtype=float)

    def random_point(self, rng):
        return rng.normal(size=self.dim)

    def __repr__(self):
        return f"Euclidean({self.dim})"


@dataclass(frozen=True)
class VectorField:
    """A vector field in trivialized coordinates.

    ``derivative(p, v)`` returns the derivative of the coordinate function
    along v. When omitted, central differences along the retraction are used.
    """

    eval: Callable
    derivative: Optional[Callable] = None

    def __call__(self, p):
        return self.eval(p)


def directional_derivative(m: ManifoldModel, p, v, k: VectorField, step=FD_STEP):
    if k.derivative is not None:
        return k.derivative(p, v)
    fwd = k.eval(m.retract(p, v, step))
    bwd = k.eval(m.retract(p, v, -step))
    return (fwd - bwd) / (2.0 * step)


def _as_vector(m, x, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dim,):
        raise ValueError(f"{name} must have shape ({m.dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def flat(m: ManifoldModel, p, v):
    return m.metric(p) @ _as_vector(m, v, "v")


def sharp(m: ManifoldModel, p, w):
    w = _as_vector(m, w, "w")
    if m.constant_metric:
        return m.metric_inv(p) @ w
    return np.linalg.solve(m.metric(p), w)


def riemannian_grad(m: ManifoldModel, p, dh):
    return sharp(m, p, dh)


def covariant_derivative_of_field(m: ManifoldModel, p, v, k: VectorField):
    v = _as_vector(m, v, "v")
    out = directional_derivative(m, p, v, k) + m.connection(p, v, k.eval(p))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite covariant derivative")
    return out


def covariant_derivative_of_projection(m: ManifoldModel, p, v, proj, e, proj_derivative=None):
    """(nabla_v P)(e) for a (1,1)-tensor P given by its matrix in the frame.

    ``proj_derivative`` is the derivative of the matrix along v; None means
    the matrix is constant in the frame.
    """
    proj = np.asarray(proj, dtype=float)
    if np.abs(proj @ proj - proj).max() > 1e-10:
        raise ValueError("projection matrix is not idempotent")
    out = m.connection(p, v, proj @ e) - proj @ m.connection(p, v, e)
    if proj_derivative is not None:
        out = out + proj_derivative @ e
    return out
