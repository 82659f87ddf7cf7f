import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from geocbf.checks import kkt_qp_oracle, random_point_data
from geocbf.errors import CBFConditionViolated, OutsideDomain
from geocbf.filters import (ControlAffinePointData, barrier_slack, compute_a_b, hs_filter, qp_filter,
                            single_integrator_filter)
from geocbf.manifold import Euclidean
from geocbf.satellite import heat_shield_constraint
from geocbf.scalar import AlphaSpec
from geocbf.so3 import SO3

LIN = AlphaSpec()


def data(dhf, dhG, u_des, h, W=None):
    dhG = np.atleast_1d(np.asarray(dhG, dtype=float))
    return ControlAffinePointData(dhf=dhf, dhG=dhG, W=np.eye(dhG.size) if W is None else W, h=h,
                                  u_des=u_des)


def test_compute_a_b_examples():
    assert compute_a_b(data(0.0, [0.0], [0.0], 1.0), LIN) == (1.0, 0.0)
    assert compute_a_b(data(-1.0, [2.0, 0.0], [0.0, 0.0], 0.0), LIN) == (-1.0, 4.0)
    _, b = compute_a_b(data(0.0, [1.0, 1.0], [0.0, 0.0], 0.0, W=np.diag([2.0, 2.0])), LIN)
    assert b == pytest.approx(1.0)


def test_b_is_squared_norm_of_explicit_adjoint():
    # G* grad h built from a small metric control-affine system: fiber metric W,
    # state metric M, input matrix G; b = ||G* grad h||_W^2 with G* = W^-1 G^T M
    rng = np.random.default_rng(0)
    for _ in range(20):
        n, m = 4, 3
        A, B = rng.normal(size=(2, n, n))
        M = A @ A.T + np.eye(n)
        C = rng.normal(size=(m, m))
        W = C @ C.T + np.eye(m)
        G = rng.normal(size=(n, m))
        dh = rng.normal(size=n)
        grad = np.linalg.solve(M, dh)
        Gstar = np.linalg.solve(W, G.T @ M)
        v = Gstar @ grad
        _, b = compute_a_b(ControlAffinePointData(0.0, dh @ G, W, 1.0, np.zeros(m)), LIN)
        assert b == pytest.approx(v @ W @ v, rel=1e-10)


def test_qp_examples():
    out = qp_filter(data(2.0, [0.0, 0.0], [5.0, 5.0], 0.0), LIN)
    np.testing.assert_array_equal(out.u, [5.0, 5.0])
    out = qp_filter(data(-2.0, [1.0, 0.0], [0.0, 0.0], 0.0), LIN)
    assert out.lam == 2.0 and out.active
    np.testing.assert_allclose(out.u, [2.0, 0.0])
    out = qp_filter(data(0.0, [1.0, 0.0], [1.0, 0.0], 1.0), LIN)
    np.testing.assert_array_equal(out.u, [1.0, 0.0])
    assert not out.active


def test_hs_examples():
    d = data(3.0, [0.0, 0.0], [0.3, -7.0], 0.0)
    np.testing.assert_array_equal(hs_filter(d, LIN).u, d.u_des)
    out = hs_filter(data(0.0, [2.0, 0.0], [0.0, 0.0], 0.0), LIN)
    assert (out.a, out.b, out.lam) == (0.0, 4.0, 0.5)
    np.testing.assert_allclose(out.u, [1.0, 0.0])


@pytest.mark.parametrize("fn", [qp_filter, hs_filter])
def test_degenerate_point_raises(fn):
    with pytest.raises(CBFConditionViolated):
        fn(data(-1.0, [0.0, 0.0], [1.0, 1.0], 0.0), LIN)


def test_non_spd_metric_rejected():
    with pytest.raises(np.linalg.LinAlgError):
        qp_filter(data(0.0, [1.0, 0.0], [0.0, 0.0], 0.0, W=np.diag([1.0, 0.0])), LIN)


def test_reconstruction_identity():
    rng = np.random.default_rng(1)
    for _ in range(200):
        d = random_point_data(rng)
        for fn in (qp_filter, hs_filter):
            out = fn(d, LIN)
            np.testing.assert_allclose(out.u, d.u_des + out.lam * np.linalg.solve(d.W, d.dhG),
                                       rtol=1e-10, atol=1e-10)


def test_kkt_oracle_agrees_with_slsqp():
    # the oracle itself, against a general-purpose constrained minimizer
    rng = np.random.default_rng(2)
    for _ in range(50):
        d = random_point_data(rng)
        rhs = -(d.dhf + LIN(d.h))
        res = minimize(lambda u: 0.5 * (u - d.u_des) @ d.W @ (u - d.u_des), d.u_des,
                       jac=lambda u: d.W @ (u - d.u_des), method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda u: d.dhG @ u - rhs,
                                     "jac": lambda u: d.dhG}],
                       options={"ftol": 1e-12, "maxiter": 500})
        diff = res.x - kkt_qp_oracle(d, LIN)
        assert np.sqrt(diff @ d.W @ diff) < 1e-5


@pytest.mark.parametrize("m", range(1, 7))
def test_qp_matches_oracle(m):
    rng = np.random.default_rng(10 + m)
    for _ in range(300):
        d = random_point_data(rng, m=m)
        diff = qp_filter(d, LIN).u - kkt_qp_oracle(d, LIN)
        assert np.sqrt(diff @ d.W @ diff) < 1e-8


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), zero_row=st.booleans())
def test_filters_satisfy_barrier_constraint(seed, zero_row):
    d = random_point_data(np.random.default_rng(seed), zero_row=zero_row)
    q, s = qp_filter(d, LIN), hs_filter(d, LIN)
    assert barrier_slack(d, LIN, q.u) >= -1e-12
    assert barrier_slack(d, LIN, s.u) >= -1e-12
    assert s.lam >= q.lam


def test_minimal_intervention_bit_exact():
    rng = np.random.default_rng(3)
    hit = 0
    for _ in range(500):
        d = random_point_data(rng)
        out = qp_filter(d, LIN)
        if out.a >= 0:
            hit += 1
            assert np.array_equal(out.u, d.u_des)
    assert hit > 50


def test_qp_lipschitz_probe_near_b_zero():
    # dhG -> 0 with a bounded away from zero: difference quotients stay bounded
    W = np.diag([1.0, 3.0])
    quotients = []
    for s in np.linspace(1e-6, 1.0, 400):
        d1 = ControlAffinePointData(-0.5, s * np.array([1.0, -2.0]), W, 1.0, np.array([0.2, 0.1]))
        d2 = ControlAffinePointData(-0.5, (s + 1e-7) * np.array([1.0, -2.0]), W, 1.0, np.array([0.2, 0.1]))
        quotients.append(np.linalg.norm(qp_filter(d2, LIN).u - qp_filter(d1, LIN).u) / 1e-7)
    assert max(quotients) < 10.0


def test_hs_smoothness_probe():
    # central differences along a curve in P converge at second order
    def u_at(t):
        dhG = np.array([np.cos(t), 0.5 + np.sin(t)])
        return hs_filter(ControlAffinePointData(-0.3 + 0.2 * t, dhG, np.diag([1.0, 2.0]), 0.1,
                                                np.array([t, -t])), LIN).u
    t0 = 0.4
    errs = []
    ref = (u_at(t0 + 1e-5) - u_at(t0 - 1e-5)) / 2e-5
    for hstep in (0.04, 0.02, 0.01):
        errs.append(np.linalg.norm((u_at(t0 + hstep) - u_at(t0 - hstep)) / (2 * hstep) - ref))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_single_integrator_examples():
    m2 = Euclidean(2)
    # h0 = 1 - |x|^2 at the centre
    k = single_integrator_filter(m2, np.zeros(2), np.zeros(2), 1.0, np.zeros(2), LIN, delta=0.1)
    np.testing.assert_array_equal(k, 0.0)
    k = single_integrator_filter(Euclidean(1), np.zeros(1), np.ones(1), 0.0, np.zeros(1), LIN)
    np.testing.assert_allclose(k, [0.5])
    h0 = heat_shield_constraint(np.pi / 4)
    R = np.eye(3)
    k = single_integrator_filter(SO3((1, 1, 2)), R, h0.differential(R), h0(R), np.zeros(3), LIN,
                                 delta=0.1)
    np.testing.assert_array_equal(k, 0.0)


def test_single_integrator_outside_domain():
    with pytest.raises(OutsideDomain):
        single_integrator_filter(Euclidean(2), np.zeros(2), np.zeros(2), -0.1, np.zeros(2), LIN)
