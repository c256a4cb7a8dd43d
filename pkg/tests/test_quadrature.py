import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate as sci_integrate

from kinmoments.quadrature import (
    IntegrationError,
    adaptive_integrate,
    build_jacobi_rule,
    build_sphere_rule,
    build_velocity_rule,
    sphere_area,
)


def jacobi_moment(k, a, b):
    """int z^k (1-z)^a (1+z)^b dz by QUADPACK's algebraic-weight routine."""
    val, _ = sci_integrate.quad(lambda z: z ** k, -1, 1, weight="alg", wvar=(b, a),
                                epsabs=1e-15, epsrel=1e-14)
    return val


def test_single_node_legendre():
    r = build_jacobi_rule(1, 0.0, 0.0)
    assert_allclose(r.nodes, [0.0])
    assert_allclose(r.weights, [2.0])


def test_z4_legendre():
    r = build_jacobi_rule(5)
    assert_allclose(r.integrate(lambda z: z ** 4), 0.4, rtol=1e-14)


def test_chebyshev_mass_against_adaptive_oracle():
    r = build_jacobi_rule(20, -0.5, -0.5)
    assert_allclose(r.integrate(np.ones_like), math.pi, rtol=1e-13)
    # oracle on t = arcsin z removes the endpoint singularities
    oracle = adaptive_integrate(lambda t: np.ones_like(t), -math.pi / 2, math.pi / 2, tol=1e-12)
    assert_allclose(r.integrate(np.ones_like), oracle.value, rtol=1e-12)


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (-0.5, -0.5), (0.25, -0.75), (2.0, 0.5), (-0.9, 3.0)])
def test_exact_up_to_stated_degree(a, b):
    r = build_jacobi_rule(8, a, b)
    assert r.degree == 15
    for k in range(r.degree + 1):
        exact = jacobi_moment(k, a, b)
        got = r.integrate(lambda z: z ** k)
        assert abs(got - exact) <= 1e-12 * max(1.0, abs(exact)), k


def test_nodes_inside_and_weights_positive():
    for order in (1, 2, 7, 64, 200):
        for a, b in [(0.0, 0.0), (-0.75, -0.75), (5.0, 1.0), (40.0, 40.0)]:
            r = build_jacobi_rule(order, a, b)
            assert np.all(np.abs(r.nodes) < 1.0)
            assert np.all(r.weights > 0.0)


@pytest.mark.parametrize("a,b", [(-1.0, 0.0), (0.0, -1.5)])
def test_rejects_nonintegrable_weight(a, b):
    with pytest.raises(ValueError):
        build_jacobi_rule(4, a, b)


def test_rejects_zero_order():
    with pytest.raises(ValueError):
        build_jacobi_rule(0)


def test_large_exponents_stay_finite():
    # the exponents seen at p in the thousands; scipy's own routine overflows here
    r = build_jacobi_rule(64, 0.0, 3000.0)
    assert math.isfinite(r.log_mass)
    assert_allclose(r.mean(np.ones_like), 1.0, rtol=1e-13)


def test_adaptive_examples():
    assert_allclose(adaptive_integrate(lambda z: np.ones_like(z), 0.0, 1.0).value, 1.0, rtol=1e-14)
    res = adaptive_integrate(lambda z: z ** -0.5, 0.0, 1.0, tol=1e-10)
    assert abs(res.value - 2.0) <= 1e-9
    assert res.error <= 1e-10


def test_adaptive_matches_jacobi_on_singular_weight():
    r = build_jacobi_rule(64, -0.25, -0.25)
    res = adaptive_integrate(lambda z: (1 - z * z) ** -0.25, -1.0, 1.0, tol=1e-12)
    assert abs(res.value - r.integrate(np.ones_like)) <= 1e-9


def test_adaptive_budget_failure_reports_partial():
    with pytest.raises(IntegrationError) as info:
        adaptive_integrate(lambda z: np.sin(1.0 / z), 1e-6, 1.0, tol=1e-14, max_intervals=20)
    assert math.isfinite(info.value.estimate)
    assert info.value.error > 0


@settings(max_examples=50, deadline=None)
@given(coeffs=st.lists(st.floats(-3, 3), min_size=1, max_size=8),
       a=st.floats(-0.9, 2.0), b=st.floats(-0.9, 2.0))
def test_rule_agrees_with_adaptive_oracle(coeffs, a, b):
    poly = np.polynomial.Polynomial(coeffs)
    r = build_jacobi_rule(16, a, b)
    got = r.integrate(poly)
    # the oracle integrates weight and polynomial together, independently of Gauss-Jacobi
    ref, _ = sci_integrate.quad(lambda z: poly(z), -1, 1, weight="alg", wvar=(b, a), epsabs=1e-13,
                                epsrel=1e-13)
    scale = max(1.0, sum(abs(c) for c in coeffs))
    assert abs(got - ref) <= 1e-9 * scale


def test_doubling_order_does_not_increase_error():
    fn = lambda z: np.exp(np.cos(3 * z)) * (1.5 + z)
    ref, _ = sci_integrate.quad(lambda z: fn(z), -1, 1, weight="alg", wvar=(-0.25, -0.25),
                                epsabs=1e-15, epsrel=1e-15)
    floor = 1e-14
    prev = math.inf
    for order in (2, 4, 8, 16, 32, 64):
        err = abs(build_jacobi_rule(order, -0.25, -0.25).integrate(fn) - ref)
        assert err <= max(prev, 10 * floor)
        prev = err


def test_velocity_rule_examples():
    r2 = build_velocity_rule(2, order=10)
    assert_allclose(r2.integrate_weighted(lambda x: np.ones(len(x))), math.pi, rtol=1e-13)
    assert abs(r2.integrate_weighted(lambda x: x[:, 0])) <= 1e-14
    r3 = build_velocity_rule(3, order=10)
    assert_allclose(r3.integrate_weighted(lambda x: np.sum(x * x, axis=1)), 1.5 * math.pi ** 1.5,
                    rtol=1e-13)


@pytest.mark.parametrize("n", [2, 3])
def test_velocity_rule_gaussian_moments(n):
    r = build_velocity_rule(n, order=12, scale=1.0)
    # int exp(-x^2) x^(2j) dx = Gamma(j + 1/2)
    for j in range(4):
        for i in range(4):
            got = r.integrate_weighted(lambda x: x[:, 0] ** (2 * j) * x[:, 1] ** (2 * i))
            exact = math.gamma(j + 0.5) * math.gamma(i + 0.5) * math.pi ** ((n - 2) / 2)
            assert_allclose(got, exact, rtol=1e-12)


def test_velocity_rule_scale_and_center():
    r = build_velocity_rule(3, order=8, scale=2.0, center=[1.0, 0.0, -1.0])
    val = r.integrate(lambda x: np.exp(-np.sum((x - [1.0, 0.0, -1.0]) ** 2, axis=1) / 4.0))
    assert_allclose(val, (4.0 * math.pi) ** 1.5, rtol=1e-12)


def test_velocity_rule_rejects_dimension():
    with pytest.raises(ValueError):
        build_velocity_rule(4)


@pytest.mark.parametrize("n", [2, 3])
def test_sphere_rule_area(n):
    dirs, w = build_sphere_rule(n, 12)
    assert_allclose(np.linalg.norm(dirs, axis=1), 1.0, rtol=1e-14)
    assert_allclose(w.sum(), sphere_area(n - 1), rtol=1e-13)
    assert np.all(w > 0)
