"""Acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line before asserting. Run with
``pytest tests/test_acceptance.py -s`` (or ``python tests/test_acceptance.py``) to see them.
"""
import itertools
import math
import time

import numpy as np
import pytest

from conftest import SMALL_QUAD, test_densities
from kinmoments.collision import (
    TestFunction,
    gain_ratio_check,
    gaussian_family,
    leibniz_check,
    loss_L,
    loss_lower_constant,
    weak_gain,
    weak_loss,
)
from kinmoments.density import (
    MomentTable,
    MultiIndex,
    PolyGaussianDensity,
    abs_moments,
    build_shell_rule,
)
from kinmoments.dsmc import chi_square_angular, collide_pairs, build_angular_sampler, init_from_density, mean_free_time, run
from kinmoments.hierarchy import (
    HierarchyConfig,
    calibrate_k0,
    calibrate_k1,
    comparison_bound,
    comparison_bound_affine,
    comparison_oracle,
    propagate_bounds,
)
from kinmoments.kernel import CollisionKernel, catalog_cross_section
from kinmoments.moments import tail_order_estimate
from kinmoments.povzner import (
    binomial_sandwich_check,
    bounded_h_bound,
    gamma_asymptotic_fit,
    gamma_table,
    povzner_check,
    povzner_one_body,
)

N3 = 3
ZERO = MultiIndex.zero(N3)


def report(number, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, detail


def catalog(mu):
    return catalog_cross_section("hard_sphere") if mu == 0 else catalog_cross_section("singular", mu=mu)


def hs_kernel():
    return CollisionKernel(1.0, catalog(0.0))


def random_pairs(seed, count, radius=3.0):
    rng = np.random.default_rng(seed)
    return [(radius * rng.standard_normal(N3) / math.sqrt(N3),
             radius * rng.standard_normal(N3) / math.sqrt(N3)) for _ in range(count)]


# 1 -------------------------------------------------------------------------


def test_criterion_01_gamma_constants():
    hs = catalog(0.0)
    ps = list(range(1, 51))
    t0 = time.perf_counter()
    tab = gamma_table(hs, ps)
    elapsed = time.perf_counter() - t0
    err = max(abs(tab.onesided(float(p)) - 1.0 / (p + 1.0)) for p in ps)
    bound_ok = all(tab.onesided(float(p)) <= min(1.0, 4.0 / (p + 1.0)) for p in ps)
    bound_ok &= all(abs(bounded_h_bound(hs, p) - min(1.0, 4.0 / (p + 1.0))) < 1e-12 for p in ps)
    report(1, err <= 1e-10 and bound_ok and elapsed < 1.0,
           f"max |gamma_p - 1/(p+1)| = {err:.2e} (tol 1e-10), bound min(1, 4/(p+1)) holds: "
           f"{bound_ok}, {elapsed:.3f} s (< 1 s)")


# 2 -------------------------------------------------------------------------


def test_criterion_02_gamma_asymptotics():
    t0 = time.perf_counter()
    rows = []
    for mu in (0.0, 0.25, 0.5, 1.0):
        h = catalog(mu)
        slope, r2 = gamma_asymptotic_fit(h, 50.0, 5000.0)
        target = -h.epsilon / 2.0
        rows.append((mu, slope, target, abs(slope - target) / abs(target)))
    elapsed = time.perf_counter() - t0
    worst = max(r[3] for r in rows)
    detail = ", ".join(f"mu={mu}: {s:.4f} vs {t:.4f}" for mu, s, t, _ in rows)
    report(2, worst <= 0.05 and elapsed < 10.0,
           f"{detail}; worst relative error {worst:.2%} (tol 5%), {elapsed:.2f} s (< 10 s)")


# 3 -------------------------------------------------------------------------


def _abs_test_function(phi):
    return TestFunction.custom(lambda x, _p=phi: np.abs(_p(x)), name=f"|{phi.name}|")


@pytest.mark.slow
def test_criterion_03_conservation():
    k = hs_kernel()
    dens = test_densities(N3)
    pairs = list(itertools.combinations(sorted(dens), 2))
    phis = [TestFunction.power(0), TestFunction.power(1)] + [TestFunction.component(i) for i in range(N3)]
    t0 = time.perf_counter()
    worst, where = 0.0, None
    for a, b in pairs:
        f, g = dens[a], dens[b]
        for phi in phis:
            diff = weak_gain(f, g, phi, k, SMALL_QUAD) - weak_loss(f, g, phi, k, SMALL_QUAD)
            scale = weak_loss(f, g, _abs_test_function(phi), k, SMALL_QUAD)
            rel = abs(diff) / scale
            if rel > worst:
                worst, where = rel, (a, b, phi.name)
    elapsed = time.perf_counter() - t0
    report(3, len(pairs) == 10 and worst <= 1e-7 and elapsed < 300.0,
           f"{len(pairs)} pairs x {len(phis)} test functions, worst |gain - loss| / scale = "
           f"{worst:.2e} at {where} (tol 1e-7), {elapsed:.1f} s (< 300 s)")


# 4 -------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_04_leibniz_rule():
    k = hs_kernel()
    dens = test_densities(N3)
    etas = [e for e in itertools.product(range(3), repeat=N3) if sum(e) <= 2]
    phis = (TestFunction.power(1), TestFunction.power(2))
    t0 = time.perf_counter()
    worst, where, count = 0.0, None, 0
    for name, f in dens.items():
        for e in etas:
            for phi in phis:
                lc = leibniz_check(f, MultiIndex(e), phi, k, SMALL_QUAD)
                count += 1
                if lc.rel_diff > worst:
                    worst, where = lc.rel_diff, (name, e, phi.name)
    elapsed = time.perf_counter() - t0
    report(4, worst <= 1e-6 and elapsed < 600.0,
           f"{count} cases ({len(dens)} densities, {len(etas)} multi-indices, 2 test functions), "
           f"worst relative gap {worst:.2e} at {where} (tol 1e-6), {elapsed:.1f} s (< 600 s)")


# 5 -------------------------------------------------------------------------


def test_criterion_05_povzner_margins():
    rows, ok = [], True
    for mu in (0.0, 0.5):
        h = catalog(mu)
        for p in (1.5, 2.0, 3.0, 5.0):
            reps = povzner_check(h, p, random_pairs(int(10 * p + 100 * mu), 1000))
            counts = {"onesided": 0, "sym": 0, "none": 0}
            for rep in reps:
                for c in rep.params["passing"]:
                    counts[c] += 1
                if not rep.params["passing"]:
                    counts["none"] += 1
            ok &= counts["none"] == 0
            rows.append(f"mu={mu} p={p}: {counts}")
    # the boundary case p = 1 under the one-sided convention
    lhs, rp, rs = povzner_one_body(catalog(0.0), 1.0, 1.0)
    boundary = abs(lhs) < 1e-14 and rp - lhs < 0 and abs(rs - lhs) < 1e-14
    report(5, ok and boundary,
           "; ".join(rows) + f"; p=1 boundary: lhs={lhs:.1e}, one-sided margin {rp - lhs:.3f} (< 0, "
           f"reproduced), symmetric margin {rs - lhs:.1e}")


# 6 -------------------------------------------------------------------------


def test_criterion_06_binomial_sandwich():
    rng = np.random.default_rng(6)
    ps = rng.uniform(1.0, 20.0, 100_000)
    ps[ps == 1.0] = 1.5
    xs = 10.0 ** rng.uniform(-3, 3, 100_000)
    ys = 10.0 ** rng.uniform(-3, 3, 100_000)
    bad = 0
    for p, x, y in zip(ps, xs, ys):
        lo, mid, up = binomial_sandwich_check(p, x, y)
        tol = 64 * np.finfo(float).eps * (x + y) ** p     # rounding in (x+y)^p - x^p - y^p
        bad += not (lo <= mid + tol and mid <= up + tol)
    report(6, bad == 0, f"{len(ps)} random (p, x, y), p in (1, 20]: {bad} violations")


# 7 -------------------------------------------------------------------------


def _coefficients(seed):
    rng = np.random.default_rng(seed)
    a_star, b_star = rng.uniform(0.1, 5), rng.uniform(0, 5)
    d_star, c, y0 = rng.uniform(0, 2), rng.uniform(0.02, 1), rng.uniform(0, 4)
    w, ph = rng.uniform(0.5, 4, 3), rng.uniform(0, 2 * math.pi, 3)
    a_fn = lambda t: a_star * (1.5 + 0.5 * math.sin(w[0] * t + ph[0]))
    b_fn = lambda t: b_star * (0.5 + 0.5 * math.sin(w[1] * t + ph[1]))
    d_fn = lambda t: d_star * (0.5 + 0.5 * math.sin(w[2] * t + ph[2]))
    return a_star, b_star, d_star, c, y0, a_fn, b_fn, d_fn


def test_criterion_07_comparison_bounds():
    worst = -math.inf
    for seed in range(1000):
        a_star, b_star, d_star, c, y0, a_fn, b_fn, d_fn = _coefficients(seed)
        if seed % 2 == 0:
            _, y = comparison_oracle(a_fn, b_fn, c, y0, 20.0)
            excess = np.max(y) - comparison_bound(a_star, b_star, c, y0)
        else:
            _, y = comparison_oracle(a_fn, b_fn, c, y0, 20.0, d_fn=d_fn)
            excess = np.max(y) - comparison_bound_affine(a_star, b_star, d_star, c, y0)
        worst = max(worst, float(excess))
    report(7, worst <= 1e-9,
           f"1000 integrations (500 plain, 500 affine), largest excess over the bound {worst:.2e} (tol 1e-9)")


# 8 -------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_08_bound_pipeline_vs_dsmc():
    t0 = time.perf_counter()
    b, alpha, p_max = 0.5, 1.0, 20.0
    k = hs_kernel()
    M = PolyGaussianDensity.maxwellian(N3)
    ps = list(np.arange(3, int(2 * p_max) + 1) / 2.0)
    rule = build_shell_rule(N3)
    z0 = {float(p): m / math.gamma(p + b) for p, m in zip(ps, abs_moments(M, ps, rule=rule))}
    m0, m1 = abs_moments(M, [0.0, 1.0], rule=rule)
    cfg = HierarchyConfig(k.cross_section, alpha, b=b, k0=calibrate_k0(alpha, b, ps),
                          k1=calibrate_k1(alpha, b, ps), k_alpha=loss_lower_constant(M, alpha),
                          m0_sup=float(m0), w_norm=float(m0 + m1), p_max=p_max)
    q = 1.1 * max(z0[p] ** (1.0 / p) for p in ps)
    kk = max(1.0, max(z0[p] / q ** p for p in ps))
    res = propagate_bounds(z0, kk, q, cfg)
    finite = all(math.isfinite(v) for v in (res.K, res.Q, res.p0))

    e = init_from_density(M, 100_000, 8, k)
    tau = mean_free_time(e)
    orders = [p for p in ps if p <= 8.0]
    tab = run(e, 2.0 * tau, orders, 0.5 * tau)
    worst = -math.inf
    checked = 0
    for frac in (0.5, 1.0, 2.0):
        t = min(tab.times(), key=lambda s: abs(s - frac * tau))
        for p in orders:
            z = tab.m(ZERO, p, t) / math.gamma(p + b)
            se = tab.meta["stderr"][f"{p!r}@{t!r}"] / math.gamma(p + b)
            worst = max(worst, (z - 3.0 * se) / res.envelope(p))
            checked += 1
    elapsed = time.perf_counter() - t0
    report(8, finite and worst <= 1.0 and elapsed < 900.0,
           f"K={res.K:.4g}, Q={res.Q:.4g}, p0={res.p0:g}; {checked} (p, t) DSMC points with p <= 8 "
           f"at t in {{0.5, 1, 2}} mean free times; max (z - 3 se) / (K Q^p) = {worst:.3e} (<= 1); "
           f"{elapsed:.1f} s (< 900 s)")


# 9 -------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_09_tail_order():
    rows, exact_ok = [], True
    for T in (0.5, 1.0, 2.0):
        d = PolyGaussianDensity.maxwellian(N3, T)
        ks = list(range(26))
        tab = MomentTable(N3)
        for p, m in zip(ks, abs_moments(d, [float(x) for x in ks], rule=build_shell_rule(N3))):
            tab.set(ZERO, float(p), 0.0, m)
        est = tail_order_estimate(tab, ZERO, 2.0)
        rel = abs(est.r_bar - 1.0 / (2.0 * T)) * 2.0 * T
        exact_ok &= rel <= 0.10
        rows.append(f"T={T}: r_bar={est.r_bar:.4f} vs {1 / (2 * T):.4f} ({rel:.1%})")

    mix = PolyGaussianDensity.maxwellian(N3, 0.5, 0.5) + PolyGaussianDensity.maxwellian(N3, 2.0, 0.5)
    e = init_from_density(mix, 100_000, 9, hs_kernel())
    tau = mean_free_time(e)
    tab = run(e, 2.0 * tau, [float(p) for p in range(9)], 2.0 * tau)
    t_end = max(tab.times())
    r0 = tail_order_estimate(tab, ZERO, 2.0, k_max=8, window=6, t=0.0).r_bar
    r2 = tail_order_estimate(tab, ZERO, 2.0, k_max=8, window=6, t=t_end).r_bar
    dsmc_ok = 0 < r2 < math.inf and 0.5 <= r2 / r0 <= 2.0
    report(9, exact_ok and dsmc_ok,
           "; ".join(rows) + f" (tol 10%); DSMC two-temperature start: r_bar(0)={r0:.4f}, "
           f"r_bar(2 mean free times)={r2:.4f}, ratio {r2 / r0:.3f} (within [0.5, 2])")


# 10 ------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_10_dsmc_physics():
    k = hs_kernel()
    e = init_from_density(PolyGaussianDensity.maxwellian(N3), 100_000, 10, k)
    mom0 = e.momentum().copy()
    tau = mean_free_time(e)
    tab = run(e, 2.0 * tau, [0.0, 1.0, 2.0, 3.0], 0.5 * tau)
    drift = tab.meta["energy_drift"]
    dmom = float(np.max(np.abs(e.momentum() - mom0)))
    mass = all(tab.m(ZERO, 0.0, t) == 1.0 for t in tab.times()) and e.mass() == 1.0
    exact = {2.0: 15.0, 3.0: 105.0}            # (2T)^p Gamma(p + 3/2) / Gamma(3/2) at T = 1
    worst_sigma = 0.0
    for p, ref in exact.items():
        for t in tab.times():
            se = tab.meta["stderr"][f"{p!r}@{t!r}"]
            worst_sigma = max(worst_sigma, abs(tab.m(ZERO, p, t) - ref) / se)
    rng = np.random.default_rng(100)
    v1, v2 = rng.standard_normal((1_000_000, N3)), rng.standard_normal((1_000_000, N3))
    _, _, z = collide_pairs(v1, v2, build_angular_sampler(k.cross_section), rng)
    _, pval = chi_square_angular(k.cross_section, z)
    ok = mass and dmom < 1e-14 and drift < 1e-10 and worst_sigma <= 3.0 and pval > 0.01
    report(10, ok,
           f"mass exact: {mass}, momentum change {dmom:.1e}, energy drift {drift:.1e} (< 1e-10); "
           f"m2, m3 within {worst_sigma:.2f} sigma of equilibrium (<= 3); angular chi^2 p-value "
           f"{pval:.3f} (> 0.01) over 1e6 collisions")


# 11 ------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.parametrize("alpha,mu", [(1.0, 0.0), (0.5, 0.5)])
def test_criterion_11_gain_ratio(alpha, mu):
    k = CollisionKernel(alpha, catalog(mu))
    k_emp, tails, rows = 0.0, True, []
    for r in (0.25, 0.5):
        gs = gaussian_family(N3, r, count=10, seed=11)
        for rep in gain_ratio_check(gs, r, k, s_values=(0, 1, 2)):
            k_emp = max(k_emp, rep.k_emp)
            tails &= all(rep.tail_nonincreasing)
            ok_bound = all(max(c) <= rep.k_emp * nm * (1 + 1e-12) for c, nm in zip(rep.ratios, rep.l1_norms))
            tails &= ok_bound
            rows.append(f"r={r} s={rep.s:g}: {rep.k_emp:.3f}")
    report(11, math.isfinite(k_emp) and k_emp > 0 and tails,
           f"kernel alpha={alpha} mu={mu}: K_emp = {k_emp:.4f} over 10 Gaussians ({'; '.join(rows)}); "
           f"ratio curves non-increasing beyond |xi| = 10: {tails}")


# 12 ------------------------------------------------------------------------


def test_criterion_12_loss_lower_bound():
    dens = test_densities(N3)
    axes = np.concatenate([np.eye(N3), [[1 / math.sqrt(2), 1 / math.sqrt(2), 0.0]]])
    rows, ok = [], True
    for name, g in dens.items():
        for alpha in (0.5, 1.0):
            ka = loss_lower_constant(g, alpha, directions=None if g.is_isotropic() else axes)
            far = loss_L(g, np.array([50.0, 0.0, 0.0]), alpha) / 50.0 ** alpha
            rel = abs(far - g.mass()) / g.mass()
            ok &= ka > 0 and rel <= 0.01
            rows.append(f"{name}/a={alpha}: k={ka:.3f}, far/m0-1={rel:.1e}")
    report(12, ok, "; ".join(rows) + " (k > 0, tol 1%)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
