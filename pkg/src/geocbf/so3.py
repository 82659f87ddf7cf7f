"""SO(3) with a left-invariant metric, in body (left-trivialized) coordinates."""
from __future__ import annotations

import math

import numpy as np

from .manifold import ManifoldModel


def cross(a, b):
    # np.cross is slow for single 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def hat(w):
    w = np.asarray(w, dtype=float)
    if w.shape != (3,):
        raise ValueError(f"hat expects a 3-vector, got shape {w.shape}")
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


def vee(S, tol=1e-12):
    S = np.asarray(S, dtype=float)
    if S.shape != (3, 3):
        raise ValueError("vee expects a 3x3 array")
    if np.abs(S + S.T).max() > tol:
        raise ValueError("vee expects a skew-symmetric matrix")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def _exp_coeffs(theta_sq):
    if theta_sq < 1e-8:  # |w| < 1e-4
        a = 1.0 - theta_sq / 6.0 + theta_sq * theta_sq / 120.0
        b = 0.5 - theta_sq / 24.0 + theta_sq * theta_sq / 720.0
    else:
        theta = math.sqrt(theta_sq)
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta_sq
    return a, b


def exp_so3(w):
    """Rodrigues formula, I + a W + b W^2 with W = hat(w)."""
    x, y, z = (float(c) for c in w)
    a, b = _exp_coeffs(x * x + y * y + z * z)
    bxy, bxz, byz = b * x * y, b * x * z, b * y * z
    bxx, byy, bzz = b * x * x, b * y * y, b * z * z
    return np.array([[1.0 - byy - bzz, bxy - a * z, bxz + a * y],
                     [bxy + a * z, 1.0 - bxx - bzz, byz - a * x],
                     [bxz - a * y, byz + a * x, 1.0 - bxx - byy]])


def log_so3(R, max_angle=math.pi - 1e-6):
    R = np.asarray(R, dtype=float)
    c = 0.5 * (np.trace(R) - 1.0)
    c = min(1.0, max(-1.0, c))
    theta = math.acos(c)
    if theta > max_angle:
        raise ValueError(f"log_so3 undefined near angle pi (angle={theta:.9f})")
    axis_s = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-4:
        return (0.5 + theta * theta / 12.0) * axis_s
    return theta / (2.0 * math.sin(theta)) * axis_s


def dexpinv_so3(u, w):
    """Inverse of the left-trivialized differential of exp at u.

    If R(t) = R0 exp(u(t)) has body velocity w, then u' = dexpinv_so3(u, w).
    """
    u0, u1, u2 = (float(x) for x in u)
    w0, w1, w2 = (float(x) for x in w)
    th2 = u0 * u0 + u1 * u1 + u2 * u2
    if th2 < 1e-8:
        c = 1.0 / 12.0 + th2 / 720.0
    else:
        th = math.sqrt(th2)
        c = (1.0 - 0.5 * th / math.tan(0.5 * th)) / th2
    x0, x1, x2 = u1 * w2 - u2 * w1, u2 * w0 - u0 * w2, u0 * w1 - u1 * w0
    y0, y1, y2 = u1 * x2 - u2 * x1, u2 * x0 - u0 * x2, u0 * x1 - u1 * x0
    return np.array([w0 + 0.5 * x0 + c * y0, w1 + 0.5 * x1 + c * y1, w2 + 0.5 * x2 + c * y2])


_I3 = np.eye(3)


def orthonormality_defect(R):
    return float(np.abs(R.T @ R - _I3).max())


def reproject(R):
    """Nearest rotation matrix (polar decomposition)."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1
        Q = U @ Vt
    return Q


def random_rotation(rng, max_angle=math.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return exp_so3(axis * rng.uniform(0, max_angle))


class SO3(ManifoldModel):
    """SO(3) with kinetic metric <w, n> = w^T J n in body coordinates.

    The connection is the Levi-Civita connection of that left-invariant
    metric on left-invariant frame fields,

        B(u, v) = 1/2 (u x v + J^-1 (u x Jv + v x Ju)),

    so B(u,v) - B(v,u) = u x v and the geodesic equation
    w' = -B(w, w) is Euler's J w' = J w x w.
    """

    dim = 3
    constant_metric = True
    reproject_tol = 1e-9

    def __init__(self, inertia):
        J = np.asarray(inertia, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.linalg.eigvalsh(J).min() <= 0:
            raise ValueError("inertia must be a positive 3-vector or SPD 3x3 matrix")
        self.J = J
        self.Jinv = np.linalg.inv(J)

    def metric(self, p):
        return self.J

    def metric_inv(self, p):
        return self.Jinv

    def connection(self, p, u, v):
        J = self.J
        return 0.5 * (cross(u, v) + self.Jinv @ (cross(u, J @ v) + cross(v, J @ u)))

    def bracket(self, u, v):
        return cross(u, v)

    def retract(self, p, u, t=1.0):
        if t != 1.0:
            u = t * np.asarray(u, dtype=float)
        return p @ exp_so3(u)

    def normalize(self, p):
        if orthonormality_defect(p) > self.reproject_tol:
            return reproject(p)
        return p

    def dexpinv(self, u, w):
        return dexpinv_so3(u, w)

    def validate_point(self, p, tol=1e-9):
        p = np.asarray(p, dtype=float)
        if p.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if orthonormality_defect(p) > tol or abs(np.linalg.det(p) - 1.0) > tol:
            raise ValueError("matrix is not a rotation")
        return p

    def random_point(self, rng):
        return random_rotation(rng)

    def __repr__(self):
        return f"SO3(J={np.diag(self.J).tolist()})"
