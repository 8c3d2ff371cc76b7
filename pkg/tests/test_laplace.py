import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastic_reflect import (BoundarySpec, DiffusionModel, LaplaceQuery, MethodUnavailable,
                             QuadratureFailure, ValidationError, closed_form_lt, discrete_lt,
                             discrete_lt_product, evaluate, limit_lt, validate_model)
from elastic_reflect import laplace
from elastic_reflect.laplace import cell_count, discrete_cell_exponents

import oracles

BM = validate_model(DiffusionModel.brownian())
OU = validate_model(DiffusionModel.ornstein_uhlenbeck(1.0))
FLAT = BoundarySpec.constant(0.0)
SQRT = BoundarySpec.sqrt(0.0, 1.0)
RAMP = BoundarySpec.linear(0.5, 1.0)


def test_limit_bm_flat():
    assert limit_lt(LaplaceQuery(BM, FLAT, 0.5, 1.0)).value == pytest.approx(math.exp(-1),
                                                                             rel=1e-12)


def test_limit_zero_local_time():
    for m in (BM, OU):
        for g in (FLAT, SQRT, RAMP):
            assert limit_lt(LaplaceQuery(m, g, 1.3, 0.0)).value == 1.0


def test_limit_bm_sqrt():
    assert limit_lt(LaplaceQuery(BM, SQRT, 2.0, 1.0)).value == pytest.approx(math.exp(-4),
                                                                             rel=1e-12)


def test_discrete_bm_flat_equals_limit():
    q = LaplaceQuery(BM, FLAT, 0.5, 1.0, 0.25)
    assert discrete_lt(q).value == pytest.approx(math.exp(-1), rel=1e-12)
    assert discrete_lt_product(q).value == pytest.approx(math.exp(-1), rel=1e-12)


def test_discrete_product_two_excursions():
    q = LaplaceQuery(BM, FLAT, 2.0, 1.0, 0.5)
    assert discrete_lt_product(q).value == pytest.approx(math.exp(-2), rel=1e-12)


@pytest.mark.parametrize("model", [BM, OU])
def test_discrete_below_one_cell(model):
    q = LaplaceQuery(model, RAMP, 1.0, 0.2, 0.25)
    assert discrete_lt(q).value == 1.0
    assert discrete_lt_product(q).value == 1.0


def test_ou_routes_agree():
    q = LaplaceQuery(OU, RAMP, 1.0, 1.0, 0.5)
    a, b = discrete_lt(q).value, discrete_lt_product(q).value
    assert abs(a - b) <= 1e-10 * b


def test_ou_discrete_matches_parabolic_cylinder_product():
    g = lambda a: 0.5 + a
    for eps in (0.5, 0.1):
        q = LaplaceQuery(OU, RAMP, 1.0, 1.0, eps)
        assert discrete_lt(q).value == pytest.approx(oracles.ou_discrete_lt(1.0, 1.0, eps, g, 1.0),
                                                     rel=1e-8)


@pytest.mark.parametrize("g, gf, gp", [
    (RAMP, lambda a: 0.5 + a, lambda a: 1.0),
    (BoundarySpec.sqrt(-0.3, 0.8), lambda a: -0.3 + 0.8 * math.sqrt(a),
     lambda a: 0.4 / math.sqrt(a) if a > 0 else math.inf),
])
def test_ou_limit_matches_parabolic_cylinder_quadrature(g, gf, gp):
    got = limit_lt(LaplaceQuery(OU, g, 0.8, 1.3)).value
    assert got == pytest.approx(oracles.ou_limit_lt(0.8, 1.3, gf, gp, 1.0), rel=1e-8)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("ell", [0.5, 1.0, 2.0])
def test_bm_sqrt_limit_closed_form(lam, ell):
    ref = oracles.bm_limit_lt(lam, ell, math.sqrt)
    assert limit_lt(LaplaceQuery(BM, SQRT, lam, ell)).value == pytest.approx(ref, rel=1e-8)


def test_power_boundary_bm():
    g = BoundarySpec.power(0.2, 1.5, 0.3)
    ref = oracles.bm_limit_lt(0.7, 1.7, lambda a: 0.2 + 1.5 * a ** 0.3)
    assert limit_lt(LaplaceQuery(BM, g, 0.7, 1.7)).value == pytest.approx(ref, rel=1e-10)


def _random_configs(n, seed):
    rng = np.random.default_rng(seed)
    families = ["constant", "linear", "sqrt", "power"]
    out = []
    for i in range(n):
        if i % 2:
            model = validate_model(DiffusionModel.ornstein_uhlenbeck(
                rng.uniform(0.3, 2.0), sigma=rng.uniform(0.5, 1.5), alpha=rng.uniform(-0.5, 0.5)))
        else:
            model = validate_model(DiffusionModel.brownian(sigma=rng.uniform(0.5, 1.5)))
        fam = families[i % 4]
        c0 = rng.uniform(-0.5, 0.5)
        g = {"constant": lambda: BoundarySpec.constant(c0),
             "linear": lambda: BoundarySpec.linear(c0, rng.uniform(0, 2)),
             "sqrt": lambda: BoundarySpec.sqrt(c0, rng.uniform(0, 2)),
             "power": lambda: BoundarySpec.power(c0, rng.uniform(0, 2), rng.uniform(0.2, 0.9))}[fam]()
        out.append(LaplaceQuery(model, g, rng.uniform(0.2, 3.0), rng.uniform(0.3, 2.0),
                                rng.choice([0.05, 0.1, 0.13, 0.25])))
    return out


@pytest.mark.parametrize("q", _random_configs(24, 2024))
def test_route_equivalence_randomized(q):
    a, b = discrete_lt(q).value, discrete_lt_product(q).value
    assert abs(a - b) <= 1e-10 * b


def test_ou_gap_ratio_band():
    limit = limit_lt(LaplaceQuery(OU, RAMP, 1.0, 1.0)).value
    gaps = [abs(discrete_lt(LaplaceQuery(OU, RAMP, 1.0, 1.0, e)).value - limit)
            for e in (0.2, 0.1, 0.05, 0.025)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    ratios = [a / b for a, b in zip(gaps, gaps[1:])]
    assert all(1.6 <= r <= 2.4 for r in ratios), ratios


def test_bm_gap_vanishes_when_eps_divides():
    for e in (0.2, 0.1, 0.05, 0.025):
        q = LaplaceQuery(BM, SQRT, 1.0, 1.0, e)
        assert discrete_lt(q).value == pytest.approx(limit_lt(LaplaceQuery(BM, SQRT, 1.0, 1.0)).value,
                                                     rel=1e-12)


def test_truncation_to_grid():
    a = discrete_lt(LaplaceQuery(OU, RAMP, 1.0, 1.1, 0.25)).value
    b = discrete_lt(LaplaceQuery(OU, RAMP, 1.0, 1.0, 0.25)).value
    assert a == b


def test_cell_count_robust():
    assert cell_count(1.0, 0.1) == 10
    assert cell_count(0.3, 0.1) == 3
    assert cell_count(0.39, 0.05 / 2 ** 0) == 7
    assert cell_count(0.09, 0.1) == 0


def test_closed_form_route():
    q = LaplaceQuery(BM, SQRT, 1.0, 1.0, 0.3)
    assert closed_form_lt(q).value == pytest.approx(discrete_lt(q).value, rel=1e-12)
    with pytest.raises(MethodUnavailable):
        closed_form_lt(LaplaceQuery(OU, SQRT, 1.0, 1.0))


def test_evaluate_dispatch():
    q = LaplaceQuery(OU, RAMP, 1.0, 1.0, 0.25)
    assert evaluate(q, "integral").route == "integral"
    assert evaluate(q, "product").route == "product"
    with pytest.raises(MethodUnavailable):
        evaluate(LaplaceQuery(OU, RAMP, 1.0, 1.0), "product")
    with pytest.raises(ValidationError):
        evaluate(q, "simpson")


@pytest.mark.parametrize("kw", [dict(lam=0.0, ell=1.0), dict(lam=1.0, ell=-1.0),
                                dict(lam=1.0, ell=1.0, eps=0.0)])
def test_query_validation(kw):
    with pytest.raises(ValidationError):
        LaplaceQuery(BM, FLAT, **kw)


def test_cell_exponents_sum_to_discrete():
    q = LaplaceQuery(OU, SQRT, 1.0, 1.0, 0.1)
    parts, errs = discrete_cell_exponents(q)
    assert parts.size == 10 and np.all(parts > 0) and np.all(errs >= 0)
    assert math.exp(-math.fsum(parts)) == pytest.approx(discrete_lt(q).value, rel=1e-14)


def test_quadrature_failure_surfaces(monkeypatch):
    monkeypatch.setattr(laplace, "QUAD_EPSABS", 1e-30)
    monkeypatch.setattr(laplace, "QUAD_EPSREL", 1.2e-14)
    monkeypatch.setattr(laplace, "QUAD_LIMIT", 1)
    with pytest.raises(QuadratureFailure):
        limit_lt(LaplaceQuery(OU, BoundarySpec.sqrt(0.0, 3.0), 1.0, 2.0))


LAMS = st.sampled_from([0.1, 0.5, 1.0, 2.0, 4.0])


@given(LAMS, LAMS, st.floats(0, 3), st.floats(0, 3))
@settings(max_examples=30, deadline=None)
def test_limit_monotone(l1, l2, e1, e2):
    g = BoundarySpec.sqrt(0.2, 0.7)
    lam_lo, lam_hi = min(l1, l2), max(l1, l2)
    ell_lo, ell_hi = min(e1, e2), max(e1, e2)
    v = lambda lam, ell: limit_lt(LaplaceQuery(OU, g, lam, ell)).value
    assert v(lam_hi, ell_lo) <= v(lam_lo, ell_lo) * (1 + 1e-12)
    assert v(lam_lo, ell_hi) <= v(lam_lo, ell_lo) * (1 + 1e-12)


@given(LAMS, st.floats(0, 3), st.sampled_from([0.05, 0.1, 0.3]))
@settings(max_examples=30, deadline=None)
def test_values_in_unit_interval(lam, ell, eps):
    q = LaplaceQuery(OU, RAMP, lam, ell, eps)
    for res in (discrete_lt(q), discrete_lt_product(q), limit_lt(LaplaceQuery(OU, RAMP, lam, ell))):
        assert 0 < res.value <= 1
        assert res.quadrature_error >= 0
