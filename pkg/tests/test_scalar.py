import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geocbf.errors import CBFConditionViolated
from geocbf.scalar import AlphaSpec, alpha_eval, in_p, lambda_hs, lambda_hs_grad, lambda_qp

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-9, 1e6, allow_nan=False)


@pytest.mark.parametrize("spec, r, expected", [
    (AlphaSpec("linear", 1.0), 0.0, 0.0),
    (AlphaSpec("linear", 2.0), 3.0, 6.0),
    (AlphaSpec("cubic", 1.0), -2.0, -8.0),
])
def test_alpha_values(spec, r, expected):
    assert alpha_eval(spec, r) == expected


@pytest.mark.parametrize("kind", ["linear", "cubic"])
@given(r=finite, dr=st.floats(1e-3, 10))
def test_alpha_strictly_increasing(kind, r, dr):
    spec = AlphaSpec(kind, 0.7)
    assert spec(r + dr) > spec(r)


@pytest.mark.parametrize("kind", ["linear", "cubic"])
def test_alpha_unbounded_both_ways(kind):
    spec = AlphaSpec(kind, 1e-3)
    assert spec(1e8) > 1e4 and spec(-1e8) < -1e4


def test_alpha_rejects_bad_input():
    with pytest.raises(ValueError):
        alpha_eval(AlphaSpec(), math.nan)
    with pytest.raises(ValueError):
        AlphaSpec("atan", 1.0)
    with pytest.raises(ValueError):
        AlphaSpec("linear", 0.0)


@pytest.mark.parametrize("a, b, expected", [(1, 0, 0), (-2, 4, 0.5), (3, 5, 0)])
def test_lambda_qp_examples(a, b, expected):
    assert lambda_qp(a, b) == expected


@pytest.mark.parametrize("a, b, expected", [(5, 0, 0), (0, 4, 0.5), (-3, 4, 1.0)])
def test_lambda_hs_examples(a, b, expected):
    assert lambda_hs(a, b) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("fn", [lambda_qp, lambda_hs])
@pytest.mark.parametrize("a", [0.0, -1.0])
def test_outside_p_raises(fn, a):
    assert not in_p(a, 0.0)
    with pytest.raises(CBFConditionViolated):
        fn(a, 0.0)


def test_negative_b_rejected():
    with pytest.raises(ValueError):
        lambda_qp(1.0, -1.0)


@given(a=finite, b=positive)
def test_constraint_satisfaction_identities(a, b):
    lq, lh = lambda_qp(a, b), lambda_hs(a, b)
    scale = max(1.0, abs(a), b)
    assert a + b * lq == pytest.approx(max(a, 0.0), abs=1e-12 * scale)
    assert a + b * lh == pytest.approx((a + math.hypot(a, b)) / 2, rel=1e-12, abs=1e-12 * scale)


@given(a=finite, b=st.one_of(st.just(0.0), positive))
def test_hs_overapproximates_qp(a, b):
    if not in_p(a, b):
        return
    assert lambda_hs(a, b) >= lambda_qp(a, b) >= 0.0


def test_hs_stable_when_a_dominates():
    # naive (-a + sqrt(a^2 + b^2)) / 2b cancels to 0 here
    a, b = 1e8, 1e-4
    assert lambda_hs(a, b) == pytest.approx(b / (4 * a), rel=1e-12)


def test_hs_tends_to_zero_as_b_vanishes():
    vals = [lambda_hs(0.5, b) for b in 10.0 ** -np.arange(1, 12)]
    assert all(np.diff(vals) < 0) and vals[-1] < 1e-10


def test_qp_continuous_across_b_zero():
    # with a > 0, lambda_qp is 0 on both sides of b = 0
    assert all(lambda_qp(0.3, b) == 0.0 for b in [0.0, 1e-300, 1e-12, 1e-3])


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    a_s = rng.uniform(1e-3, 5, 10_000) * rng.choice([-1, 1], 10_000)
    b_s = rng.uniform(1e-2, 5, 10_000)
    for a, b in zip(a_s, b_s):
        ga, gb = lambda_hs_grad(a, b)
        ha, hb = 1e-6 * max(1.0, abs(a)), 1e-6 * b
        fa = (lambda_hs(a + ha, b) - lambda_hs(a - ha, b)) / (2 * ha)
        fb = (lambda_hs(a, b + hb) - lambda_hs(a, b - hb)) / (2 * hb)
        assert fa == pytest.approx(ga, rel=1e-6, abs=1e-9)
        assert fb == pytest.approx(gb, rel=1e-6, abs=1e-9)
