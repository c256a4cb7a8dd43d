import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from kinmoments.density import (
    MomentTable,
    MultiIndex,
    PolyGaussianDensity,
    gaussian_moment,
    moment_table_from_density,
)
from kinmoments.moments import (
    beta_sum,
    denormalize,
    low_order_check,
    fit_geometric_bound,
    product_orders,
    lemma7_check,
    normalize,
    product_sum,
    s_p,
    tail_order_estimate,
    tail_rate_from_sequence,
    z_cap,
    z_values,
)

ZERO = "0:0:0"


def maxwellian_table(ps, T=1.0, b=None, alpha=None, mass=1.0):
    tab = MomentTable(3, b=b, alpha=alpha)
    for p in ps:
        tab.set(ZERO, p, 0.0, gaussian_moment(3, p, T, mass))
    return tab


def half_grid(p_max, extra=()):
    return sorted(set([k / 2 for k in range(0, int(2 * p_max) + 1)]) | set(extra))


def test_normalize_examples_and_roundtrip():
    tab = maxwellian_table(half_grid(6))
    z1 = normalize(tab, 1.0)
    assert_allclose(z1.z(ZERO, 1), tab.m(ZERO, 1))
    zh = normalize(tab, 0.5)
    for p in (0.5, 2, 5.5):
        assert_allclose(zh.z(ZERO, p), gaussian_moment(3, p) / math.gamma(p + 0.5), rtol=1e-14)
    back = denormalize(z_values(zh), 0.5, 3)
    for k, v in tab.entries.items():
        assert abs(back.entries[k] - v) <= 1e-12 * v
    assert tab.b is None
    with pytest.raises(ValueError):
        normalize(tab, 0.0)


def test_product_sum_examples():
    tab = moment_table_from_density(PolyGaussianDensity.maxwellian(3, 0.8), "1:1:0", [1, 2], b=0.5)
    assert_allclose(product_sum(tab, ZERO, 1, 2), tab.m(ZERO, 1) * tab.m(ZERO, 2))
    assert product_sum(tab, ZERO, 1, 2, strict=True) == 0
    eta = MultiIndex((1, 1, 0))
    m = lambda nu, p: tab.m(nu, p)
    by_hand = (m("0:0:0", 1) * m("1:1:0", 2) + m("1:0:0", 1) * m("0:1:0", 2)
               + m("0:1:0", 1) * m("1:0:0", 2) + m("1:1:0", 1) * m("0:0:0", 2))
    assert_allclose(product_sum(tab, eta, 1, 2), by_hand, rtol=1e-15)
    assert_allclose(product_sum(tab, eta, 1, 2, strict=True), by_hand - m("1:1:0", 1) * m("0:0:0", 2),
                    rtol=1e-15)
    # the diagonal index 2:0:0 weights the middle term by 2
    with pytest.raises(KeyError):
        product_sum(tab, "2:0:0", 1, 2)


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(0.01, 100), min_size=8, max_size=8))
def test_product_sum_symmetry(vals):
    tab = MomentTable(2)
    it = iter(vals)
    for nu in ("0:0", "1:0", "0:1", "1:1"):
        for p in (1.0, 2.5):
            tab.set(nu, p, 0.0, next(it))
    a = product_sum(tab, "1:1", 1.0, 2.5)
    b = product_sum(tab, "1:1", 2.5, 1.0)
    assert a == pytest.approx(b, rel=1e-14)


def test_s_p_examples():
    alpha = 1.0
    tab = maxwellian_table(half_grid(4, product_orders(2, alpha) + product_orders(1.5, alpha)))
    m = lambda p: gaussian_moment(3, p)
    # p = 3/2: k_p = 1, generalized binomial 3/2
    assert_allclose(s_p(tab, ZERO, 1.5, alpha), 1.5 * (m(1) * m(1.0) + m(1.5) * m(0.5)), rtol=1e-14)
    assert_allclose(s_p(tab, ZERO, 2, alpha), 2 * (m(1) * m(1.5) + m(1.5) * m(1)), rtol=1e-14)
    scaled = maxwellian_table(half_grid(4, product_orders(2, alpha)), mass=3.0)
    assert_allclose(s_p(scaled, ZERO, 2, alpha), 9 * s_p(tab, ZERO, 2, alpha), rtol=1e-14)
    with pytest.raises(ValueError):
        s_p(tab, ZERO, 1.0, alpha)


def test_z_cap_examples_and_monotonicity():
    alpha = 0.5
    orders = half_grid(3, product_orders(1.5, alpha) + product_orders(3, alpha))
    tab = maxwellian_table(orders, b=0.5)
    z = lambda p: tab.z(ZERO, p)
    cands = [z(1) * z(0.5 + alpha / 2), z(1 + alpha / 2) * z(0.5)]
    assert_allclose(z_cap(tab, ZERO, 1.5, alpha), max(cands), rtol=1e-15)
    base = z_cap(tab, ZERO, 3, alpha)
    for key in list(tab.entries):
        bumped = MomentTable(3, dict(tab.entries), 0.5)
        bumped.entries[key] *= 1.5
        assert z_cap(bumped, ZERO, 3, alpha) >= base


def test_product_ratio_on_maxwellian_family():
    alpha, b = 1.0, 0.5
    ps = list(range(2, 21))
    extra = [o for p in ps for o in product_orders(p, alpha)]
    for T in (0.5, 1.0, 2.0):
        tab = maxwellian_table(half_grid(21, extra), T=T, b=b)
        rep = lemma7_check(tab, ZERO, ps, alpha)
        assert rep.holds
        assert rep.a_max <= max(rep.beta_bounds) * (1 + 1e-12)
        # k_p steps at odd p, so the trend is read along each parity class
        for parity in (0, 1):
            tail = [a for p, a in zip(ps, rep.ratios) if p >= 10 and p % 2 == parity]
            assert all(y <= x * (1 + 1e-12) for x, y in zip(tail, tail[1:]))
        # the single-p ratio is exactly the definition
        S = s_p(tab, ZERO, 5, alpha)
        Z = z_cap(tab, ZERO, 5, alpha)
        assert_allclose(rep.ratios[3], S / (math.gamma(5 + alpha / 2 + 2 * b) * Z), rtol=1e-14)


def test_product_ratio_flags_vanishing_z():
    tab = MomentTable(3, b=0.5)
    for p in half_grid(4, product_orders(2, 1.0)):
        tab.set(ZERO, p, 0.0, 0.0)
    rep = lemma7_check(tab, ZERO, [2], 1.0)
    assert rep.ratios == [None] and rep.flagged


def test_beta_sum_bounds_on_direct_tables():
    # S_p <= beta_sum * Gamma(p + a/2 + 2b) Z_p holds for any nonnegative table
    rng = np.random.default_rng(0)
    alpha, b = 0.6, 0.4
    orders = half_grid(6, product_orders(6, alpha) + product_orders(4.5, alpha))
    for _ in range(20):
        tab = MomentTable(3, b=b)
        for p in orders:
            tab.set(ZERO, p, 0.0, float(rng.uniform(0.1, 10)) * math.gamma(p + b))
        rep = lemma7_check(tab, ZERO, [4.5, 6], alpha)
        assert rep.holds
    assert beta_sum(2, 1.0, 0.5) > 0


def test_low_order_check_direct_path():
    alpha = 0.5
    for d in (PolyGaussianDensity.maxwellian(3, 0.4), PolyGaussianDensity.maxwellian(3, 2.0, 3.0)):
        tab = moment_table_from_density(d, "1:0:0", [1 + alpha / 2, 1.5], b=0.5)
        for nu in ("0:0:0", "1:0:0"):
            lhs, rhs, ok = low_order_check(tab, nu, alpha)
            assert ok and lhs <= rhs


# -- geometric bounds ------------------------------------------------------


def test_geometric_fit_exact():
    vals = {p: 3 * 2.0 ** p for p in half_grid(10)[3:]}
    gb = fit_geometric_bound(vals)
    assert_allclose([gb.K, gb.Q], [3, 2], rtol=1e-9)
    assert max(gb.residuals) <= 1e-9 and gb.geometric


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
def test_geometric_fit_maxwellian(T):
    tab = maxwellian_table(half_grid(20)[3:], T=T, b=0.5)
    gb = fit_geometric_bound(tab, ZERO)
    assert max(gb.residuals) <= 1e-9
    assert abs(gb.Q - 2 * T) <= 0.15 * 2 * T
    for p in gb.p_grid:
        assert tab.z(ZERO, p) <= gb.bound(p) * (1 + 1e-9)


def test_geometric_fit_flags_factorial():
    gb = fit_geometric_bound({p: math.gamma(p + 1) for p in range(1, 21)})
    assert not gb.geometric
    assert max(gb.residuals) <= 1e-9


def test_geometric_fit_needs_points():
    with pytest.raises(ValueError):
        fit_geometric_bound({1: 1.0, 2: 2.0, 3: 3.0})


@settings(max_examples=40, deadline=None)
@given(logs=st.lists(st.floats(-5, 5), min_size=4, max_size=20))
def test_geometric_envelope_property(logs):
    vals = {float(i + 1): math.exp(v) for i, v in enumerate(logs)}
    gb = fit_geometric_bound(vals)
    assert max(gb.residuals) <= 1e-9
    for p, v in vals.items():
        assert v <= gb.bound(p) * (1 + 1e-9)


# -- tail order ------------------------------------------------------------


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
def test_tail_order_maxwellian_rate(T):
    tab = maxwellian_table(half_grid(25), T=T)
    est = tail_order_estimate(tab, ZERO, 2, k_max=25)
    assert abs(est.r_bar - 1 / (2 * T)) <= 0.1 / (2 * T)
    assert est.method == "fit"


def test_tail_order_flags():
    tab = maxwellian_table(half_grid(25))
    assert tail_order_estimate(tab, ZERO, 1, k_max=25).r_bar == math.inf
    heavy = [math.gamma(k + 1) ** 1.5 for k in range(26)]
    assert tail_rate_from_sequence(heavy, 2).r_bar == 0.0


def test_tail_order_needs_enough_moments():
    tab = maxwellian_table(half_grid(4))
    with pytest.raises(ValueError):
        tail_order_estimate(tab, ZERO, 2)


@settings(max_examples=30, deadline=None)
@given(T=st.floats(0.2, 5.0), mass=st.floats(0.1, 10.0))
def test_tail_rate_nonnegative_and_mass_free(T, mass):
    ms = [gaussian_moment(3, k, T, mass) for k in range(26)]
    est = tail_rate_from_sequence(ms, 2)
    assert est.r_bar >= 0
    assert abs(est.r_bar * 2 * T - 1) <= 0.1
