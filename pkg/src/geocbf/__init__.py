"""Geometric control barrier function safety filters for mechanical systems."""
from .errors import CBFConditionViolated, ConfigError, Divergence, GeoCBFError, OutsideDomain
from .filters import ControlAffinePointData, FilterOutput, hs_filter, qp_filter, single_integrator_filter
from .integrators import Trajectory, rkmk4, simulate, step
from .manifold import Euclidean, ManifoldModel, VectorField
from .mechanics import (SMCS, BacksteppingCBF, ConfigurationConstraint, MechState,
                        backstepping_cbf, backstepping_h, build_actuation_split, hdot, safe_force)
from .scalar import AlphaSpec, lambda_hs, lambda_qp
from .so3 import SO3

__version__ = "0.1.0"
