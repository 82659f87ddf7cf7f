"""Flat-space double integrator used as a Euclidean test bed.

Q = R^3 with a diagonal mass metric, an optional spring potential
V = k/2 |x|^2, forces on the first two axes, and the cylinder constraint
h0(x) = radius^2 - x1^2 - x2^2. The unactuated x3 direction lies in
ker dh0, so the backstepping construction applies.
"""
from __future__ import annotations

import numpy as np

from .manifold import Euclidean
from .mechanics import SMCS, ConfigurationConstraint, MechState

ACTUATED_XY = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def cylinder_constraint(radius=1.0) -> ConfigurationConstraint:
    r2 = float(radius) ** 2
    return ConfigurationConstraint(
        value=lambda x: r2 - x[0] ** 2 - x[1] ** 2,
        differential=lambda x: np.array([-2.0 * x[0], -2.0 * x[1], 0.0]),
        differential_derivative=lambda x, v: np.array([-2.0 * v[0], -2.0 * v[1], 0.0]),
    )


def double_integrator_smcs(mass=(1.0, 1.0, 1.0), stiffness=0.0, codistribution=ACTUATED_XY):
    manifold = Euclidean(3, np.diag(np.asarray(mass, dtype=float)))
    k = float(stiffness)
    return SMCS(manifold=manifold, codistribution=codistribution,
                potential=lambda x: 0.5 * k * float(x @ x),
                potential_differential=lambda x: k * np.asarray(x, dtype=float)), manifold


def nominal_pd_point(kp, kd, target, st: MechState):
    """PD force on the actuated axes toward a target point."""
    err = np.asarray(target, dtype=float) - st.q
    return kp * err[:2] - kd * st.v[:2]
