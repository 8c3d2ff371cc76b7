import contextlib
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastic_reflect import (DescendingHit, DiffusionModel, LogDerivativeSolver, OutOfDomain,
                             hitting_lt, log_derivative, log_derivative_integral,
                             sample_hitting_time, validate_model)
from elastic_reflect.phi_solver import get_solver, positive_root

import oracles

BM = validate_model(DiffusionModel.brownian())
OU = validate_model(DiffusionModel.ornstein_uhlenbeck(1.0))
# value of u at x=0 for b(x) = -x, sigma = 1, lam = 1; equals 2/sqrt(pi)
OU_U0 = 1.1283791670955126


def drifted(mu, sigma=1.0):
    with pytest.warns(Warning):
        return validate_model(DiffusionModel.brownian(sigma=sigma, mu=mu))


def test_bm_log_derivative_constant():
    assert log_derivative(BM, 0.5, 0.0) == pytest.approx(1.0, rel=1e-15)
    assert log_derivative(BM, 0.5, -7.3) == pytest.approx(1.0, rel=1e-15)


def test_negative_drift_root():
    m = drifted(-1.0)
    assert log_derivative(m, 1.5, 2.0) == pytest.approx(3.0, rel=1e-15)


@pytest.mark.parametrize("b", [-50.0, -1.0, 0.0, 1.0, 50.0, 1e6])
def test_positive_root_matches_numpy_roots(b):
    assert float(positive_root(b, 0.7, 1.3)) == pytest.approx(oracles.const_root(b, 0.7, 1.3),
                                                             rel=1e-9)


def test_log_derivative_integral_examples():
    assert log_derivative_integral(BM, 0.5, 0.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert log_derivative_integral(OU, 1.0, 0.3, 0.3) == 0.0
    assert log_derivative_integral(BM, 1.0, 0.3, 0.3) == 0.0
    assert log_derivative_integral(drifted(-1.0), 1.5, 0.0, 2.0) == pytest.approx(6.0, rel=1e-15)


def test_descending_hit_rejected():
    with pytest.raises(DescendingHit):
        hitting_lt(BM, 1.0, 1.0, 0.0)
    with pytest.raises(DescendingHit):
        log_derivative_integral(OU, 1.0, 1.0, 0.0)


def test_out_of_window_rejected():
    m = validate_model(DiffusionModel.ornstein_uhlenbeck(1.0, domain=(-2, 2)))
    with pytest.raises(OutOfDomain):
        log_derivative(m, 1.0, 3.0)
    with pytest.raises(OutOfDomain):
        log_derivative_integral(m, 1.0, 0.0, 2.5)


def test_lambda_must_be_positive():
    with pytest.raises(ValueError):
        LogDerivativeSolver(OU, 0.0)


def test_ou_pinned_value():
    assert log_derivative(OU, 1.0, 0.0) == pytest.approx(OU_U0, rel=1e-9)
    assert OU_U0 == pytest.approx(2 / math.sqrt(math.pi), rel=1e-15)


@pytest.mark.parametrize("lam, beta, sigma, alpha", [
    (1.0, 1.0, 1.0, 0.0),
    (0.3, 2.0, 0.5, 0.4),
    (2.5, 0.5, 1.5, -1.0),
])
def test_ou_matches_parabolic_cylinder(lam, beta, sigma, alpha):
    m = validate_model(DiffusionModel.ornstein_uhlenbeck(beta, sigma=sigma, alpha=alpha))
    xs = np.linspace(-3, 3, 13)
    got = log_derivative(m, lam, xs)
    ref = [oracles.ou_u(x, lam, beta, sigma, alpha) for x in xs]
    np.testing.assert_allclose(got, ref, rtol=1e-8)


def test_ou_hitting_lt_matches_parabolic_cylinder():
    for x, z in [(-1.0, 0.5), (0.0, 0.0), (0.2, 2.0)]:
        assert hitting_lt(OU, 1.0, x, z) == pytest.approx(oracles.ou_hitting_lt(x, z, 1.0, 1.0),
                                                        rel=1e-9)


def test_ou_hitting_lt_monte_carlo():
    # E_0 exp(-T_z) by bridge-corrected Euler paths versus exp(-int_0^z u)
    z, n = 0.5, 600
    draws = np.array([sample_hitting_time(OU, 0.0, z, seed=11, path_index=i, h=1e-4, t_cap=30)
                      for i in range(n)])
    vals = np.exp(-draws)
    mean, se = vals.mean(), vals.std(ddof=1) / math.sqrt(n)
    assert abs(mean - hitting_lt(OU, 1.0, 0.0, z)) < 4 * se


@pytest.mark.parametrize("b, sigma, lam", [(0.0, 1.0, 0.5), (-1.0, 1.0, 1.5), (2.0, 0.5, 1.0),
                                           (-0.3, 2.0, 3.0), (1.0, 1.0, 0.1), (0.0, 0.3, 4.0)])
def test_forced_riccati_matches_root(b, sigma, lam):
    with pytest.warns(Warning) if b != 0 else contextlib.nullcontext():
        m = validate_model(DiffusionModel.brownian(sigma=sigma, mu=b))
    solver = LogDerivativeSolver(m, lam, force_riccati=True)
    xs = np.linspace(-5, 5, 50)
    np.testing.assert_allclose(solver(xs), oracles.const_root(b, sigma, lam), rtol=1e-8)


@pytest.mark.parametrize("lam", [0.05, 0.2, 1.0, 5.0])
def test_riccati_residual_small(lam):
    solver = LogDerivativeSolver(OU, lam)
    solver.ensure(-4, 4)
    xs = np.random.default_rng(0).uniform(-4, 4, 100)
    assert np.max(np.abs(solver.riccati_residual(xs))) <= 10 * solver.rel_tol * lam
    t, u = solver.nodes
    inside = (t > -4) & (t < 4)
    assert np.all(u > 0)
    assert np.max(np.abs(solver.riccati_residual(t[inside]))) <= 10 * solver.rel_tol * lam


@pytest.mark.parametrize("beta, sigma, lam", [(3.0, 0.3, 0.01), (3.0, 0.3, 0.05), (2.0, 0.5, 0.01)])
def test_riccati_residual_stiff_relative(beta, sigma, lam):
    # when 0.5 sigma^2 u^2 dwarfs lam the residual is judged against the terms it balances
    m = validate_model(DiffusionModel.ornstein_uhlenbeck(beta, sigma=sigma))
    solver = LogDerivativeSolver(m, lam)
    xs = np.random.default_rng(1).uniform(-3, 3, 100)
    u = solver(xs)
    scale = lam + np.abs(m.drift(xs) * u) + 0.5 * sigma ** 2 * u * u
    assert np.all(np.abs(solver.riccati_residual(xs)) <= 10 * solver.rel_tol * scale)


def test_solver_anchor_is_left_of_request():
    solver = LogDerivativeSolver(OU, 1.0)
    solver(0.0)
    assert solver.x_anchor < -1.0


def test_integral_matches_quad_of_oracle():
    from scipy.integrate import quad
    ref, _ = quad(lambda y: oracles.ou_u(y, 0.7, 1.0), -1.2, 2.3, epsabs=1e-14, epsrel=1e-13)
    val, err = get_solver(OU, 0.7).integral(-1.2, 2.3)
    assert val == pytest.approx(ref, rel=1e-9)
    assert err < 1e-8


LAMBDAS = st.sampled_from([0.05, 0.1, 0.3, 0.7, 1.0, 2.0, 5.0])


@given(LAMBDAS, LAMBDAS, st.floats(-2, 1), st.floats(0, 2))
@settings(max_examples=25, deadline=None)
def test_hitting_lt_decreasing_in_lambda(l1, l2, x, d):
    lo, hi = min(l1, l2), max(l1, l2)
    assert hitting_lt(OU, hi, x, x + d) <= hitting_lt(OU, lo, x, x + d) * (1 + 1e-12)


@given(st.floats(-2, 1), st.floats(0, 1.5), st.floats(0, 1.5), st.sampled_from([0.3, 1.0, 2.0]))
@settings(max_examples=40, deadline=None)
def test_hitting_lt_multiplicative(x, d1, d2, lam):
    # strong Markov at the intermediate level
    y, z = x + d1, x + d1 + d2
    whole = hitting_lt(OU, lam, x, z)
    assert whole == pytest.approx(hitting_lt(OU, lam, x, y) * hitting_lt(OU, lam, y, z),
                                  rel=1e-10)


@given(st.floats(-3, 3), LAMBDAS)
@settings(max_examples=40, deadline=None)
def test_log_derivative_positive(x, lam):
    assert log_derivative(OU, lam, x) > 0


def test_hitting_lt_bounds():
    assert hitting_lt(OU, 1.0, 0.4, 0.4) == 1.0
    assert 0 < hitting_lt(OU, 1.0, -1.0, 1.0) < 1
