"""Sharp Povzner constants gamma_p, their asymptotics, the Povzner inequality and the binomial sandwich."""
from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .collision import DEFAULT_QUAD, TestFunction, WeakFormReport, a_op
from .quadrature import DEFAULT_LINE_ORDER, adaptive_integrate, build_jacobi_rule, sphere_area

CONVENTIONS = ("onesided", "sym")


def _log_branch_integral(h, p, plus, order):
    """log of omega_{n-2} int ((1 +/- z)/2)^p h_bar(z) (1-z^2)^((n-3)/2) dz."""
    a = h.folded_exponent
    rule = build_jacobi_rule(order, a, a + p) if plus else build_jacobi_rule(order, a + p, a)
    mean = rule.mean(h.smooth_bar)
    if mean <= 0.0:
        return -math.inf
    return math.log(sphere_area(h.n - 2)) + rule.log_mass - p * math.log(2.0) + math.log(mean)


def gamma_p(h, p, convention="onesided", order=DEFAULT_LINE_ORDER):
    """gamma_p = omega_{n-2} int ((1+z)/2)^p h_bar(z) (1-z^2)^((n-3)/2) dz.

    ``convention="sym"`` adds the mirrored branch ((1-z)/2)^p, giving the symmetrised
    gain average (twice the one-sided value, since h_bar is even). The factor
    ((1+z)/2)^p is folded into the Jacobi weight, so very large p stays exact.
    """
    if p < 1:
        raise ValueError(f"gamma_p needs p >= 1, got {p}")
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    val = math.exp(_log_branch_integral(h, p, True, order))
    if convention == "sym":
        val += math.exp(_log_branch_integral(h, p, False, order))
    return val


def gamma_p_adaptive(h, p, tol=1e-13):
    """Independent route: adaptive Gauss-Kronrod on t in (0, 1) with z = 2t - 1, singular
    endpoint factors handled by the adaptive splitting."""
    a = h.folded_exponent

    def integrand(t):
        t = np.asarray(t, dtype=float)
        z = 2.0 * t - 1.0
        # ((1+z)/2)^p = t^p and (1-z^2)^a = 4^a t^a (1-t)^a
        return (2.0 * 4.0 ** a * t ** (p + a) * (1.0 - t) ** a * h.smooth_bar(z))

    res = adaptive_integrate(integrand, 0.0, 1.0, tol=tol, rel_tol=tol, max_intervals=20000)
    return sphere_area(h.n - 2) * res.value


@dataclass
class GammaTable:
    cross_section: object
    entries: dict = field(default_factory=dict)     # p -> (gamma_onesided, gamma_sym)

    @property
    def epsilon(self):
        return self.cross_section.epsilon

    def onesided(self, p):
        return self.entries[p][0]

    def sym(self, p):
        return self.entries[p][1]

    def orders(self):
        return sorted(self.entries)

    def is_strictly_decreasing(self):
        vals = [self.onesided(p) for p in self.orders()]
        return all(b < a for a, b in zip(vals, vals[1:]))

    def to_csv(self, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "gamma_onesided", "gamma_sym"])
        for p in self.orders():
            w.writerow([repr(float(p)), repr(self.onesided(p)), repr(self.sym(p))])
        return buf.getvalue()


def gamma_table(h, ps, order=DEFAULT_LINE_ORDER):
    tab = GammaTable(h)
    for p in ps:
        tab.entries[float(p)] = (gamma_p(h, p, "onesided", order), gamma_p(h, p, "sym", order))
    return tab


def gamma_asymptotic_fit(h, p_min=50.0, p_max=5000.0, count=24):
    """Least-squares slope of log gamma_p against log p on a geometric grid; returns (slope, r2)."""
    if count < 4:
        raise ValueError("asymptotic fit needs at least 4 points")
    if p_min < 10:
        raise ValueError("asymptotic fit needs p_min >= 10")
    ps = np.geomspace(p_min, p_max, count)
    lg = np.log([gamma_p(h, p) for p in ps])
    lp = np.log(ps)
    slope, icpt = np.polyfit(lp, lg, 1)
    resid = lg - (slope * lp + icpt)
    ss = float(np.sum((lg - lg.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return float(slope), r2


def bounded_h_bound(h, p):
    """min{1, 16 pi ||h||_inf / (p+1)}."""
    if not h.bounded:
        raise ValueError("the sup-norm bound needs a bounded cross section (mu = 0)")
    return min(1.0, 16.0 * math.pi * h.sup_norm() / (p + 1.0))


def bounded_h_bound_check(h, p):
    return gamma_p(h, p) < bounded_h_bound(h, p)


# ---------------------------------------------------------------------------
# Povzner inequality
# ---------------------------------------------------------------------------


def povzner_rhs(gamma, p, x, y):
    """-(1 - gamma)(x^p + y^p) + gamma((x + y)^p - x^p - y^p) with x = |xi|^2, y = |xi*|^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xp, yp = x ** p, y ** p
    return -(1.0 - gamma) * (xp + yp) + gamma * ((x + y) ** p - xp - yp)


def povzner_one_body(h, p, xi_norm):
    """Closed forms at xi* = 0, where xi' and xi'* have squared norms |xi|^2 (1 +/- z)/2.

    Returns (lhs, rhs_onesided, rhs_sym); lhs = |xi|^(2p) (gamma_sym - 1).
    """
    x = float(xi_norm) ** 2
    gs, gp = gamma_p(h, p, "sym"), gamma_p(h, p, "onesided")
    return x ** p * (gs - 1.0), float(povzner_rhs(gp, p, x, 0.0)), float(povzner_rhs(gs, p, x, 0.0))


def povzner_check(h, p, pairs, quad=DEFAULT_QUAD, tolerance=1e-10):
    """A[phi_p](xi, xi*) against the Povzner bound for every pair, under both gamma conventions.

    Each report carries rhs under the one-sided convention; ``terms`` holds the
    symmetrised right-hand side and margin, and ``params["passing"]`` names the
    conventions whose margin clears the error bar.
    """
    pairs = list(pairs)
    xi = np.array([a for a, _ in pairs], dtype=float)
    xs = np.array([b for _, b in pairs], dtype=float)
    phi = TestFunction.power(p)
    # report the finer value; its distance to the base rule bounds its error
    lhs = np.atleast_1d(a_op(phi, xi, xs, h, quad.finer()))
    err = np.abs(lhs - np.atleast_1d(a_op(phi, xi, xs, h, quad)))
    x = np.sum(xi * xi, axis=-1)
    y = np.sum(xs * xs, axis=-1)
    gp, gs = gamma_p(h, p, "onesided"), gamma_p(h, p, "sym")
    rp = np.atleast_1d(povzner_rhs(gp, p, x, y))
    rs = np.atleast_1d(povzner_rhs(gs, p, x, y))
    out = []
    for i in range(len(pairs)):
        slack = tolerance * max(1.0, abs(rs[i]), abs(lhs[i])) + err[i]
        passing = [c for c, r in (("onesided", rp[i]), ("sym", rs[i])) if r - lhs[i] >= -slack]
        rep = WeakFormReport(float(lhs[i]), float(rp[i]), float(err[i]), case_id=f"pair{i}",
                             params={"p": p, "gamma_onesided": gp, "gamma_sym": gs,
                                     "xi": xi[i].tolist(), "xi_star": xs[i].tolist(),
                                     "passing": passing},
                             terms={"rhs_sym": float(rs[i]), "margin_sym": float(rs[i] - lhs[i])},
                             tolerance=tolerance * max(1.0, abs(rs[i]), abs(lhs[i])))
        out.append(rep)
    return out


# ---------------------------------------------------------------------------
# binomial sandwich
# ---------------------------------------------------------------------------


def k_p(p):
    """k_p = floor((p + 1) / 2)."""
    return int(math.floor((p + 1.0) / 2.0))


def gen_binomial(p, k):
    """Generalised binomial p (p-1) ... (p-k+1) / k! by the falling-factorial product."""
    out = 1.0
    for j in range(int(k)):
        out *= (p - j) / (j + 1.0)
    return out


def binomial_sandwich_check(p, x, y):
    """(lower, mid, upper) with mid = (x+y)^p - x^p - y^p and the two partial binomial sums."""
    if not p > 1:
        raise ValueError("binomial sandwich needs p > 1")
    if not (x > 0 and y > 0):
        raise ValueError("binomial sandwich needs x, y > 0")
    kp = k_p(p)

    def partial(kmax):
        return sum(gen_binomial(p, k) * (x ** k * y ** (p - k) + x ** (p - k) * y ** k)
                   for k in range(1, kmax + 1))

    mid = (x + y) ** p - x ** p - y ** p
    return partial(kp - 1), mid, partial(kp)
