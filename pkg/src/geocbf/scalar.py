"""Scalar kernels shared by every safety filter.

``lambda_qp`` is the multiplier of the closed-form CBF-QP, ``lambda_hs``
its smooth half-Sontag overapproximation. Both are defined on

    P = {(a, b) : a > 0 or b > 0}

and raise :class:`CBFConditionViolated` outside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CBFConditionViolated

LINEAR = "linear"
CUBIC = "cubic"


@dataclass(frozen=True)
class AlphaSpec:
    """Extended class-K-infinity function, ``gain * r`` or ``gain * r**3``."""

    kind: str = LINEAR
    gain: float = 1.0

    def __post_init__(self):
        if self.kind not in (LINEAR, CUBIC):
            raise ValueError(f"unknown alpha kind {self.kind!r}")
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise ValueError("alpha gain must be positive and finite")

    def __call__(self, r):
        return alpha_eval(self, r)


def alpha_eval(spec: AlphaSpec, r: float) -> float:
    r = float(r)
    if not math.isfinite(r):
        raise ValueError(f"alpha argument must be finite, got {r}")
    if spec.kind == LINEAR:
        return spec.gain * r
    return spec.gain * r**3


def alpha_prime(spec: AlphaSpec, r: float) -> float:
    if spec.kind == LINEAR:
        return spec.gain
    return 3.0 * spec.gain * r * r


def in_p(a: float, b: float) -> bool:
    return a > 0 or b > 0


def _check(a, b):
    if b < 0:
        raise ValueError(f"b must be nonnegative, got {b}")
    if not in_p(a, b):
        raise CBFConditionViolated(f"(a, b) = ({a:.6g}, {b:.6g}) is outside P")


def lambda_qp(a: float, b: float) -> float:
    _check(a, b)
    if b == 0:
        return 0.0
    return max(0.0, -a / b)


def lambda_hs(a: float, b: float) -> float:
    _check(a, b)
    if b == 0:
        return 0.0
    s = math.hypot(a, b)
    if a > 0:
        # algebraically equal, avoids cancellation in -a + s
        return b / (2.0 * (a + s))
    return (s - a) / (2.0 * b)


def lambda_hs_grad(a: float, b: float) -> tuple[float, float]:
    """Partial derivatives (d/da, d/db) of ``lambda_hs`` on P.

    Valid on all of P, including the b = 0 edge where a > 0.
    """
    _check(a, b)
    s = math.hypot(a, b)
    a_plus_s = a + s if a > 0 else b * b / (s - a)
    denom = 2.0 * s * a_plus_s
    return -b / denom, a / denom
