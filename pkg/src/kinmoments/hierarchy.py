"""Differential inequalities for normalised derivative moments, ODE comparison bounds and the
uniform-in-time geometric bound pipeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import gammaln

from .density import MomentTable, MultiIndex
from .povzner import CONVENTIONS, GammaTable, gamma_p, k_p


class HierarchyIntegrationError(RuntimeError):
    def __init__(self, message, t_reached):
        super().__init__(f"{message} (reached t = {t_reached})")
        self.t_reached = t_reached


# ---------------------------------------------------------------------------
# comparison bounds
# ---------------------------------------------------------------------------


def comparison_bound(a_star, b_star, c, y0):
    """Bound for y' + a y^(1+c) <= b: max{y0, (b*/a*)^(1/(1+c))}."""
    if not (a_star > 0 and c > 0 and y0 >= 0 and b_star >= 0):
        raise ValueError("comparison bound needs a* > 0, c > 0, b* >= 0, y0 >= 0")
    return max(float(y0), (b_star / a_star) ** (1.0 / (1.0 + c)))


def comparison_bound_affine(a_star, b_star, d_star, c, y0):
    """Bound for y' + a y^(1+c) <= d y + b: max{y0, y_bar} with a y_bar^(1+c) = d y_bar + b."""
    if d_star < 0:
        raise ValueError("d* must be nonnegative")
    if d_star == 0:
        return comparison_bound(a_star, b_star, c, y0)
    if not (a_star > 0 and c > 0 and y0 >= 0 and b_star >= 0):
        raise ValueError("comparison bound needs a* > 0, c > 0, b* >= 0, y0 >= 0")

    def g(y):
        return a_star * y ** (1.0 + c) - d_star * y - b_star

    # g < 0 just above 0 and g > 0 beyond both (2b/a)^(1/(1+c)) and (2d/a)^(1/c)
    hi = max((2.0 * b_star / a_star) ** (1.0 / (1.0 + c)), (2.0 * d_star / a_star) ** (1.0 / c), 1e-300)
    while g(hi) <= 0.0:
        hi *= 2.0
    if b_star == 0.0:
        y_bar = (d_star / a_star) ** (1.0 / c)
    else:
        assert g(0.0) < 0.0 < g(hi), "root bracket failed"
        y_bar = brentq(g, 0.0, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=500)
    return max(float(y0), y_bar)


def comparison_oracle(a_fn, b_fn, c, y0, t_end, d_fn=None, rtol=1e-11, atol=1e-13, max_step=np.inf):
    """Integrate y' = b(t) + d(t) y - a(t) y^(1+c) with explicit adaptive steps; returns (t, y)."""
    def rhs(t, y):
        yp = max(y[0], 0.0)
        out = b_fn(t) - a_fn(t) * yp ** (1.0 + c)
        if d_fn is not None:
            out += d_fn(t) * yp
        return [out]

    sol = solve_ivp(rhs, (0.0, t_end), [float(y0)], method="RK45", rtol=rtol, atol=atol,
                    max_step=max_step, dense_output=False)
    if not sol.success:
        raise HierarchyIntegrationError(sol.message, float(sol.t[-1]))
    return sol.t, sol.y[0]


# ---------------------------------------------------------------------------
# configuration and coefficients
# ---------------------------------------------------------------------------


@dataclass
class HierarchyConfig:
    """Inputs of the bound pipeline.

    ``w_norm`` bounds sup_t delta^nu m_q for every q in [0, 1] and nu <= eta (the
    W^{|eta|,1}_2 norm). At eta = 0 mass and energy are conserved, so m_0 + m_1 of the
    initial datum is admissible. ``ih_K``, ``ih_Q`` are the geometric constants already
    established for lower-order derivatives (unused when eta_order = 0).
    """

    cross_section: object
    alpha: float
    b: float | None = None
    k0: float = 1.0
    k1: float = 1.0
    k_alpha: float = 1.0
    m0_sup: float = 1.0
    w_norm: float = 1.0
    eta_order: int = 0
    ih_K: float = 1.0
    ih_Q: float = 1.0
    convention: str = "onesided"
    p_max: float = 20.0
    p_cap: float = 4000.0
    gamma_order: int = 64

    def __post_init__(self):
        eps = self.cross_section.epsilon
        if self.b is None:
            self.b = eps / 4.0
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 < self.b < eps / 2.0:
            raise ValueError(f"b = {self.b} must lie in (0, eps/2) = (0, {eps / 2.0})")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown gamma convention {self.convention!r}")
        for name in ("k0", "k1", "k_alpha", "m0_sup", "w_norm", "ih_K", "ih_Q"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.p_max < 3:
            raise ValueError("p_max must be at least 3")
        self._gamma = {}

    def gamma(self, p):
        p = float(p)
        if p not in self._gamma:
            self._gamma[p] = gamma_p(self.cross_section, p, self.convention, self.gamma_order)
        g = self._gamma[p]
        if not 0.0 < g < 1.0:
            raise ValueError(f"gamma_{p} = {g} is outside (0, 1)")
        return g

    @property
    def lower_weight(self):
        """2^{|eta|} (number of terms in a Leibniz sum); 0 removes the strictly-lower terms at eta = 0."""
        return 0.0 if self.eta_order == 0 else 2.0 ** self.eta_order

    def log_a_star(self, p):
        c = self.alpha / (2.0 * p)
        return (math.log1p(-self.gamma(p)) + math.log(self.k_alpha) + c * gammaln(p + self.b)
                - c * math.log(self.m0_sup))

    def log_zlow(self, q):
        return math.log(self.w_norm) - gammaln(q + self.b)

    def log_lower(self, p):
        """log of the strictly-lower Leibniz terms in b_p, bounded with the induction constants."""
        if self.eta_order == 0:
            return -math.inf
        lw = math.log(self.lower_weight * self.ih_K * self.w_norm) + p * math.log(self.ih_Q)
        return lw + math.log(self.k1 * self.ih_Q ** (self.alpha / 2.0) * p ** (self.alpha / 2.0) + 1.0)


@dataclass
class OdeCoefficients:
    p: float
    a_star: float
    b_star: float
    c: float
    d_star: float = 0.0
    provenance: dict = field(default_factory=dict)

    def bound(self, y0):
        if self.d_star > 0.0:
            return comparison_bound_affine(self.a_star, self.b_star, self.d_star, self.c, y0)
        return comparison_bound(self.a_star, self.b_star, self.c, y0)


def _grid(p_end):
    """Orders 3/2, 2, 5/2, ..., p_end."""
    return np.arange(3, int(round(2 * p_end)) + 1) / 2.0


def _lookup(bounds, q):
    q = round(float(q), 12)
    for key, v in bounds.items():
        if abs(float(key) - q) < 1e-12:
            return float(v)
    raise KeyError(f"missing lower-order bound for order {q}")


def assemble_coefficients(p, alpha, b, gamma, k_alpha, m0_sup, lower_bounds, k0=1.0, k1=1.0,
                          convention="onesided", w_norm=None, eta_order=0, ih_K=1.0, ih_Q=1.0):
    """Coefficients of y' + a y^(1+c) <= d y + b for y = delta^eta z_p.

    ``lower_bounds`` maps orders q to sup-in-time bounds of the normalised moments used by
    Z_p (for p = 3/2: q = 1/2, 1, (1+alpha)/2). ``gamma`` is a GammaTable or a number.
    """
    p = float(p)
    if abs(2 * p - round(2 * p)) > 1e-12 or p < 1.5:
        raise ValueError(f"p must lie on the grid 3/2, 2, 5/2, ...; got {p}")
    g = (gamma.onesided(p) if convention == "onesided" else gamma.sym(p)) if isinstance(gamma, GammaTable) \
        else float(gamma)
    if not 0.0 < g < 1.0:
        raise ValueError(f"gamma_p = {g} must lie in (0, 1)")
    if not (k_alpha > 0 and m0_sup > 0):
        raise ValueError("k_alpha and m0_sup must be positive")
    c = alpha / (2.0 * p)
    a_star = (1.0 - g) * k_alpha * math.exp(c * gammaln(p + b)) * m0_sup ** (-c)
    lw = 0.0 if eta_order == 0 else 2.0 ** eta_order
    pref = g * k0 * p ** (alpha / 2.0 + b)
    prov = {"gamma_p": g, "k_alpha": k_alpha, "k0": k0, "k1": k1, "b": b, "m0_sup": m0_sup,
            "convention": convention, "eta_order": eta_order}
    if w_norm is not None:
        lower = lw * ih_K * w_norm * ih_Q ** p * (k1 * ih_Q ** (alpha / 2) * p ** (alpha / 2) + 1.0)
    else:
        lower = 0.0
    if abs(p - 1.5) < 1e-12:
        z_half = _lookup(lower_bounds, 0.5)
        z_one = _lookup(lower_bounds, 1.0)
        z_mid = _lookup(lower_bounds, (1.0 + alpha) / 2.0)
        d_star = pref * z_half
        # delta^eta(z_1 z_{(1+a)/2}) and the z_{1/2} part of delta^eta(z_{1+a/2} z_{1/2})
        zz = max(1.0, lw) * z_one * z_mid + z_half
        if lw:
            zz += (lw - 1.0) * z_half * (1.0 + ih_K * ih_Q ** 1.5)
        b_star = pref * zz + lower
        prov.update({"z_half": z_half, "z_one": z_one, "z_mid": z_mid, "scale": "z"})
        return OdeCoefficients(p, a_star, b_star, c, d_star, prov)
    zs = []
    for k in range(1, k_p(p) + 1):
        for qa, qb in ((k, p - k + alpha / 2.0), (k + alpha / 2.0, p - k)):
            zs.append(_lookup(lower_bounds, qa) * _lookup(lower_bounds, qb))
    Z = max(zs) * max(1.0, lw)
    prov["Z_p"] = Z
    return OdeCoefficients(p, a_star, pref * Z + lower, c, 0.0, prov)


# ---------------------------------------------------------------------------
# bound pipeline
# ---------------------------------------------------------------------------


@dataclass
class BoundPipelineResult:
    K: float
    Q: float
    p0: float
    per_p_bounds: dict
    trace: list
    a1: dict = field(default_factory=dict)
    criterion_at_p0: float = math.nan
    a2_sup: float = 0.0
    log_bounds: dict = field(default_factory=dict)
    p0_closure: float = math.nan

    def envelope(self, p):
        return self.K * self.Q ** p

    def log_envelope(self, p):
        return math.log(self.K) + p * math.log(self.Q)

    def to_dict(self):
        return {"K": self.K, "Q": self.Q, "p0": self.p0, "p0_closure": self.p0_closure,
                "criterion_at_p0": self.criterion_at_p0,
                "a2_sup": self.a2_sup,
                "per_p_bounds": {repr(p): v for p, v in self.per_p_bounds.items()},
                "trace": self.trace}


class _Recursion:
    """Per-order comparison bounds in log space, sup-in-time, for one derivative level."""

    def __init__(self, cfg, log_k, log_q):
        self.cfg = cfg
        self.log_k, self.log_q = log_k, log_q
        self.LB = []          # log bound at p = (j + 3) / 2
        self.src = []
        self.coef = []        # (log a*, log b*, d*)

    def p_end(self):
        return (len(self.LB) + 2) / 2.0

    def _lm_half(self, j):
        """log m-bound at order j/2 for already computed orders."""
        cfg = self.cfg
        if j <= 2:
            return math.log(cfg.w_norm)
        return self.LB[j - 3] + gammaln(j / 2.0 + cfg.b)

    def log_z(self, q):
        """log z-bound at any order q already covered, with the log-convex chord between half-grid nodes."""
        cfg = self.cfg
        if q <= 1.0 + 1e-12:
            return cfg.log_zlow(q)
        j0 = int(math.floor(2.0 * q + 1e-12))
        th = 2.0 * q - j0
        lm = self._lm_half(j0) if th < 1e-12 else (
            (1.0 - th) * self._lm_half(j0) + th * self._lm_half(j0 + 1))
        return lm - gammaln(q + cfg.b)

    def log_env_lower(self, q):
        cfg = self.cfg
        if q <= 1.0 + 1e-12:
            return cfg.log_zlow(q)
        return math.log(cfg.ih_K) + q * math.log(cfg.ih_Q)

    def log_Z(self, p):
        cfg, a = self.cfg, self.cfg.alpha
        best = -math.inf
        for k in range(1, k_p(p) + 1):
            for qa, qb in ((k, p - k + a / 2.0), (k + a / 2.0, p - k)):
                if cfg.eta_order == 0:
                    v = self.log_z(qa) + self.log_z(qb)
                else:
                    # nu = eta and nu = 0 carry the current level; mixed nu use the lower envelope
                    terms = [self.log_z(qa) + self.log_env_lower(qb),
                             self.log_env_lower(qa) + self.log_z(qb)]
                    mixed = cfg.lower_weight - 2.0
                    if mixed > 0:
                        terms.append(math.log(mixed) + self.log_env_lower(qa) + self.log_env_lower(qb))
                    v = float(np.logaddexp.reduce(terms))
                best = max(best, v)
        return best

    def step(self):
        cfg = self.cfg
        p = self.p_end() + 0.5
        c = cfg.alpha / (2.0 * p)
        la = cfg.log_a_star(p)
        lpref = math.log(cfg.gamma(p) * cfg.k0) + (cfg.alpha / 2.0 + cfg.b) * math.log(p)
        ly0 = self.log_k + p * self.log_q
        if abs(p - 1.5) < 1e-12:
            lw = cfg.lower_weight
            z_half = math.exp(cfg.log_zlow(0.5))
            zz = max(1.0, lw) * math.exp(cfg.log_zlow(1.0) + cfg.log_zlow((1.0 + cfg.alpha) / 2.0)) + z_half
            if lw:
                zz += (lw - 1.0) * z_half * (1.0 + cfg.ih_K * cfg.ih_Q ** 1.5)
            pref = math.exp(lpref)
            b = pref * zz + math.exp(cfg.log_lower(p))
            d = pref * z_half
            ybar = comparison_bound_affine(math.exp(la), b, d, c, 0.0)
            lode = math.log(ybar) if ybar > 0 else -math.inf
            self.coef.append((la, math.log(b), d))
        else:
            lb = float(np.logaddexp(lpref + self.log_Z(p), cfg.log_lower(p)))
            lode = (lb - la) / (1.0 + c)
            self.coef.append((la, lb, 0.0))
        if ly0 >= lode:
            self.LB.append(ly0)
            self.src.append("initial")
        else:
            self.LB.append(lode)
            self.src.append("ode")

    def extend(self, p_end):
        while self.p_end() < p_end - 1e-12:
            self.step()


def _a1(cfg, p):
    return math.exp(math.log(cfg.k0 * cfg.gamma(p)) + (cfg.alpha / 2.0 + cfg.b) * math.log(p)
                    - cfg.log_a_star(p))


def _a2(cfg, p, Q):
    if cfg.eta_order == 0:
        return 0.0
    num = cfg.lower_weight * cfg.ih_K * cfg.w_norm * (cfg.k1 * Q ** (cfg.alpha / 2.0) * p ** (cfg.alpha / 2.0) + 1.0)
    return num * math.exp(-cfg.log_a_star(p))


def _chord_excess(b, jmax=40, samples=33):
    """max over q > 1 of the gap between the half-grid chord of log Gamma(q+b) and log Gamma(q+b)."""
    th = np.linspace(0.0, 1.0, samples)
    best = 0.0
    for j in range(2, jmax):
        q0, q1 = j / 2.0, (j + 1) / 2.0
        chord = (1 - th) * gammaln(q0 + b) + th * gammaln(q1 + b)
        best = max(best, float(np.max(chord - gammaln(q0 + th * (q1 - q0) + b))))
    return best


def _log_bstar_envelope(cfg, p, logK, logQ, delta):
    """log b*_p when every order in (1, p) obeys the envelope K Q^q (up to the chord excess)."""
    a = cfg.alpha
    ks = np.arange(1, k_p(p) + 1, dtype=float)
    qa = np.concatenate([ks, ks + a / 2.0])
    qb = np.concatenate([p - ks + a / 2.0, p - ks])

    def env(q, lk, lq, dl):
        low = q <= 1.0 + 1e-12
        out = lk + q * lq + dl
        if np.any(low):
            out = np.where(low, math.log(cfg.w_norm) - gammaln(q + cfg.b), out)
        return out

    cur_a, cur_b = env(qa, logK, logQ, delta), env(qb, logK, logQ, delta)
    if cfg.eta_order == 0:
        lz = float(np.max(cur_a + cur_b))
    else:
        lka, lkq = math.log(cfg.ih_K), math.log(cfg.ih_Q)
        low_a, low_b = env(qa, lka, lkq, 0.0), env(qb, lka, lkq, 0.0)
        terms = [cur_a + low_b, low_a + cur_b]
        if cfg.lower_weight > 2:
            terms.append(math.log(cfg.lower_weight - 2.0) + low_a + low_b)
        lz = float(np.max(np.logaddexp.reduce(terms, axis=0)))
    lpref = math.log(cfg.gamma(p) * cfg.k0) + (a / 2.0 + cfg.b) * math.log(p)
    return float(np.logaddexp(lpref + lz, cfg.log_lower(p)))


def _closure_ok(cfg, p, logK, logQ, delta):
    """Does the comparison bound at order p stay below K Q^p once all lower orders do?"""
    c = cfg.alpha / (2.0 * p)
    lb = _log_bstar_envelope(cfg, p, logK, logQ, delta)
    return (lb - cfg.log_a_star(p)) / (1.0 + c) <= logK + p * logQ + 1e-12


def _closure_p0(cfg, logK, logQ, delta, dense_to=200.0):
    """First order from which the envelope closes: dense half-grid up to ``dense_to``,
    geometric samples up to p_cap beyond, bisection inside a failing gap."""
    def ok(p):
        return _closure_ok(cfg, p, logK, logQ, delta)

    dense = _grid(min(dense_to, cfg.p_cap))
    dense = dense[dense >= 2.0]
    sparse = np.unique(np.round(2 * np.geomspace(dense[-1], cfg.p_cap, 80)) / 2.0)[1:]
    last_fail = None
    for i in range(len(sparse) - 1, -1, -1):
        if not ok(sparse[i]):
            lo = sparse[i]
            hi = sparse[i + 1] if i + 1 < len(sparse) else math.inf
            if hi == math.inf:
                return math.inf
            while hi - lo > 0.5:
                mid = round(lo + hi) / 2.0
                if mid <= lo or mid >= hi:
                    break
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            return float(hi)
    for p in dense[::-1]:
        if not ok(p):
            last_fail = float(p)
            break
    return 2.0 if last_fail is None else last_fail + 0.5


def propagate_bounds(initial_z, k, q, config, max_rounds=50):
    """Geometric bound delta^eta z_p(t) <= K Q^p uniform in t.

    ``initial_z`` maps p (or (nu, p)) to the normalised initial moments; every entry must
    satisfy z_p(0) <= k q^p. Per-order bounds max{k q^p, comparison fixed point} are
    built bottom-up. K is the largest of k, 2 sup A2 and a config-only constant covering
    the orders q <= 1; Q is the smallest rate (at least q) putting that constant times
    Q^p above every per-order bound, so both are non-decreasing in k and q. The
    recursion is extended until every higher order closes against the envelope itself
    (``p0_closure``): with all lower orders below K Q^q the fixed point at p stays below
    K Q^p. ``p0`` is the threshold of the sufficient criterion kz Q^(a/2) A1_p <= 1/2,
    with kz = K at eta = 0 (products of the same level) and 2^{|eta|} K1 otherwise; A1
    is checked to decrease beyond it.
    """
    cfg = config
    if not (k > 0 and q > 0):
        raise ValueError("k and q must be positive")
    for key, z0 in dict(initial_z).items():
        p = key[1] if isinstance(key, tuple) else key
        if z0 > k * q ** p * (1.0 + 1e-12):
            raise ValueError(f"initial datum violates z_p(0) <= k q^p at p = {p}")
    rec = _Recursion(cfg, math.log(k), math.log(q))
    rec.extend(cfg.p_max)
    delta = _chord_excess(cfg.b)
    # K is anchored at a config-only constant covering the orders q <= 1 for any Q >= 1;
    # Q is then the smallest rate putting K_base Q^p above every computed bound. The
    # per-order bounds grow with k and q, so K and Q do too.
    low_qs = np.linspace(0.0, 1.0, 101)
    log_kbase = max(0.0, float(np.max(math.log(cfg.w_norm) - gammaln(low_qs + cfg.b))))

    def log_q_needed():
        ps = _grid(rec.p_end())
        return max(math.log(q), 0.0, float(np.max((np.array(rec.LB) - log_kbase) / ps)))

    def log_k_needed(Q):
        lks = [log_kbase, math.log(k)]
        a2 = max(_a2(cfg, p, Q) for p in _grid(max(rec.p_end(), 2.0)) if p >= 2.0)
        if a2 > 0:
            lks.append(math.log(2.0 * a2))
        return max(lks)

    for _ in range(max_rounds):
        logQ = log_q_needed()
        Q = math.exp(logQ)
        logK = log_k_needed(Q)
        p0c = _closure_p0(cfg, logK, logQ, delta)
        if p0c > cfg.p_cap:
            raise RuntimeError(f"envelope does not close below p_cap = {cfg.p_cap}")
        if p0c <= rec.p_end():
            break
        rec.extend(p0c)
    else:
        raise RuntimeError("bound pipeline did not stabilise")
    K = math.exp(logK)
    a2_sup = max(_a2(cfg, p, Q) for p in _grid(rec.p_end()) if p >= 2.0)
    kz = K if cfg.eta_order == 0 else cfg.lower_weight * cfg.ih_K
    p0, crit0 = threshold_p0(cfg, kz, Q)
    ps = _grid(rec.p_end())
    trace = [{"p": float(p), "branch": s, "log_bound": lb, "log_a_star": c[0], "log_b_star": c[1],
              "d_star": c[2]} for p, s, lb, c in zip(ps, rec.src, rec.LB, rec.coef)]
    per_p = {float(p): math.exp(lb) if lb < 700 else math.inf for p, lb in zip(ps, rec.LB)}
    a1 = {float(p): _a1(cfg, p) for p in ps}
    return BoundPipelineResult(K, Q, p0 if p0 is not None else math.inf, per_p, trace, a1, crit0,
                               a2_sup, {float(p): lb for p, lb in zip(ps, rec.LB)}, float(p0c))


def threshold_p0(cfg, kz, Q, p_limit=1e8):
    """First grid order p0 with kz Q^(a/2) A1_p <= 1/2, found by doubling then bisection.

    A1 is checked to be non-increasing on geometric samples from p0 to ``p_limit``, so
    the criterion keeps holding beyond p0. Returns (p0, criterion at p0), or (inf, nan).
    """
    def crit(p):
        return kz * Q ** (cfg.alpha / 2.0) * _a1(cfg, p)

    def decreasing_from(p):
        tail = np.unique(np.round(2 * np.geomspace(p, p_limit, 60)) / 2.0)
        a1s = [_a1(cfg, s) for s in tail]
        return all(y <= x * (1 + 1e-12) for x, y in zip(a1s, a1s[1:]))

    lo, hi = 1.5, 2.0
    while crit(hi) > 0.5 or not decreasing_from(hi):
        lo, hi = hi, 2.0 * hi
        if hi > p_limit:
            return math.inf, math.nan
    if crit(1.5) <= 0.5 and decreasing_from(1.5):
        return 1.5, crit(1.5)
    # invariant: crit(lo) > 1/2 or A1 not yet decreasing at lo, crit(hi) <= 1/2
    while hi - lo > 0.5:
        mid = round(lo + hi) / 2.0          # half-grid midpoint
        if mid <= lo or mid >= hi:
            break
        if crit(mid) <= 0.5 and decreasing_from(mid):
            hi = mid
        else:
            lo = mid
    return float(hi), crit(hi)


def a1_sequence(config, ps):
    return {float(p): _a1(config, p) for p in ps}


def calibrate_k0(alpha, b, ps):
    """Smallest k0 with Gamma(p+a/2+2b) sum_k C(p,k)[beta terms] <= k0 p^(a/2+b) Gamma(p+b) on ``ps``."""
    from .moments import beta_sum
    return max(beta_sum(p, alpha, b) * math.exp(gammaln(p + alpha / 2.0 + 2.0 * b) - gammaln(p + b))
               / p ** (alpha / 2.0 + b) for p in ps)


def calibrate_k1(alpha, b, ps):
    """Smallest k1 with Gamma(p+a/2+b) <= k1 p^(a/2) Gamma(p+b) on ``ps``."""
    return max(math.exp(gammaln(p + alpha / 2.0 + b) - gammaln(p + b)) / p ** (alpha / 2.0) for p in ps)


# ---------------------------------------------------------------------------
# worst-case hierarchy
# ---------------------------------------------------------------------------


def integrate_truncated_hierarchy(initial_z, p_max, coefficients, t_end, envelope=(1.0, 1.0),
                                  n_out=11, rtol=1e-8, atol=1e-12):
    """Integrate the equality version of the moment inequalities on 3/2, 2, ..., p_max.

    ``coefficients`` is a HierarchyConfig; ``initial_z`` maps p -> z_p(0) on the grid.
    Orders q <= 1 are held at their bounds, fractional orders use the log-convex chord,
    and variables are scaled by the envelope K Q^p. Z_p only involves orders below p,
    so no closure beyond p_max is needed. Returns a MomentTable of the z-values (stored
    as m = z Gamma(p + b)) at ``n_out`` equally spaced times.
    """
    cfg = coefficients
    if p_max < 3:
        raise ValueError("truncation needs p_max >= 3")
    ps = _grid(p_max)
    K, Q = envelope
    lscale = np.array([math.log(K) + p * math.log(Q) for p in ps])
    la = np.array([cfg.log_a_star(p) for p in ps])
    cs = cfg.alpha / (2.0 * ps)
    lpref = np.array([math.log(cfg.gamma(p) * cfg.k0) + (cfg.alpha / 2.0 + cfg.b) * math.log(p) for p in ps])
    lower = np.array([math.exp(cfg.log_lower(p)) for p in ps])
    y0 = np.array([initial_z[float(p)] for p in ps]) / np.exp(lscale)
    lw = cfg.lower_weight
    z_half = math.exp(cfg.log_zlow(0.5))
    zz_const = max(1.0, lw) * math.exp(cfg.log_zlow(1.0) + cfg.log_zlow((1.0 + cfg.alpha) / 2.0)) + z_half
    if lw:
        zz_const += (lw - 1.0) * z_half * (1.0 + cfg.ih_K * cfg.ih_Q ** 1.5)

    def rhs(t, y):
        rec = _Recursion(cfg, 0.0, 0.0)
        z = np.maximum(y, 0.0) * np.exp(lscale)
        with np.errstate(divide="ignore"):
            rec.LB = list(np.log(z))
        out = np.empty_like(y)
        for i, p in enumerate(ps):
            zi = z[i]
            loss = math.exp(la[i]) * zi ** (1.0 + cs[i])
            if i == 0:
                pref = math.exp(lpref[0])
                gain = pref * zz_const + pref * z_half * zi + lower[0]
            else:
                gain = math.exp(lpref[i] + rec.log_Z(p)) + lower[i]
            out[i] = (gain - loss) / math.exp(lscale[i])
        return out

    t_eval = np.linspace(0.0, t_end, n_out)
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="LSODA", t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise HierarchyIntegrationError(sol.message, float(sol.t[-1]) if len(sol.t) else 0.0)
    tab = MomentTable(cfg.cross_section.n, b=cfg.b, alpha=cfg.alpha,
                      meta={"kind": "truncated_hierarchy", "p_max": float(p_max)})
    zero = MultiIndex.zero(cfg.cross_section.n)
    for j, t in enumerate(sol.t):
        for i, p in enumerate(ps):
            z = max(sol.y[i, j], 0.0) * math.exp(lscale[i])
            tab.set(zero, p, t, z * math.exp(gammaln(p + cfg.b)))
    return tab
