"""Moment-table algebra: normalised moments, binomial product sums, S_p and Z_p, geometric bounds, tail rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, gammaln

from .density import MomentTable, MultiIndex, as_multi_index
from .povzner import gen_binomial, k_p


def normalize(table, b):
    """Copy of ``table`` carrying the normalisation parameter b (z = m / Gamma(p + b))."""
    if not b > 0:
        raise ValueError("normalisation needs b > 0")
    out = MomentTable(table.n, dict(table.entries), float(b), table.alpha, list(table.flags),
                      dict(table.meta))
    return out


def z_values(table):
    """{(nu, p, t): z} for a normalised table."""
    if table.b is None:
        raise ValueError("table is not normalised")
    return {k: v / math.gamma(k[1] + table.b) for k, v in table.entries.items()}


def denormalize(zvals, b, n, alpha=None):
    """Inverse of ``z_values``: rebuild the m-table from normalised entries."""
    tab = MomentTable(n, b=float(b), alpha=alpha)
    for (nu, p, t), z in zvals.items():
        tab.set(nu, p, t, z * math.gamma(p + b))
    return tab


def _value(table, nu, p, t, which, interpolate):
    if which == "m":
        return table.m(nu, p, t, interpolate)
    return table.z(nu, p, t, interpolate)


def product_sum(table, eta, p, q, strict=False, t=0.0, which="m", interpolate=False):
    """delta^eta(x_p x_q) = sum_{nu <= eta} C(eta, nu) delta^nu x_p delta^(eta-nu) x_q.

    ``strict`` drops nu = eta. ``which`` selects raw (m) or normalised (z) entries.
    """
    eta = as_multi_index(eta, table.n)
    return sum(eta.binom(nu) * _value(table, nu, p, t, which, interpolate)
               * _value(table, eta - nu, q, t, which, interpolate)
               for nu in eta.below(strict=strict))


def mixed_product_sum(table, eta, p, q, strict=False, t=0.0, interpolate=False):
    """delta^eta(m_p z_q): m-entries on the nu side, z-entries on the eta - nu side."""
    eta = as_multi_index(eta, table.n)
    return sum(eta.binom(nu) * table.m(nu, p, t, interpolate) * table.z(eta - nu, q, t, interpolate)
               for nu in eta.below(strict=strict))


def product_orders(p, alpha):
    """Orders needed by S_p and Z_p at order p."""
    out = set()
    for k in range(1, k_p(p) + 1):
        out.update({float(k), p - k + alpha / 2.0, k + alpha / 2.0, float(p - k)})
    return sorted(out)


def s_p(table, eta, p, alpha, t=0.0, interpolate=False):
    """delta^eta S_p = sum_{k=1}^{k_p} C(p,k) {delta^eta(m_k m_{p-k+a/2}) + delta^eta(m_{k+a/2} m_{p-k})}."""
    if not p > 1:
        raise ValueError("S_p needs p > 1")
    total = 0.0
    for k in range(1, k_p(p) + 1):
        c = gen_binomial(p, k)
        total += c * (product_sum(table, eta, k, p - k + alpha / 2.0, t=t, interpolate=interpolate)
                      + product_sum(table, eta, k + alpha / 2.0, p - k, t=t, interpolate=interpolate))
    return total


def z_cap(table, eta, p, alpha, t=0.0, interpolate=False):
    """delta^eta Z_p = max over 1 <= k <= k_p of delta^eta(z_k z_{p-k+a/2}) and delta^eta(z_{k+a/2} z_{p-k})."""
    if not p > 1:
        raise ValueError("Z_p needs p > 1")
    cands = []
    for k in range(1, k_p(p) + 1):
        cands.append(product_sum(table, eta, k, p - k + alpha / 2.0, t=t, which="z",
                                 interpolate=interpolate))
        cands.append(product_sum(table, eta, k + alpha / 2.0, p - k, t=t, which="z",
                                 interpolate=interpolate))
    return max(cands)


def beta_sum(p, alpha, b):
    """sum_k C(p,k) [B(k+b, p-k+a/2+b) + B(k+a/2+b, p-k+b)]: the constant multiplying Gamma(p+a/2+2b) Z_p."""
    total = 0.0
    for k in range(1, k_p(p) + 1):
        total += gen_binomial(p, k) * (math.exp(betaln(k + b, p - k + alpha / 2.0 + b))
                                       + math.exp(betaln(k + alpha / 2.0 + b, p - k + b)))
    return total


@dataclass
class ProductRatioReport:
    eta: str
    alpha: float
    b: float
    orders: list
    ratios: list          # A_p = S_p / (Gamma(p + a/2 + 2b) Z_p); None where Z_p = 0
    beta_bounds: list     # the beta-function sum bounding each A_p
    flagged: list = field(default_factory=list)

    @property
    def a_max(self):
        vals = [a for a in self.ratios if a is not None]
        return max(vals) if vals else math.nan

    @property
    def holds(self):
        return all(a is None or a <= bb * (1 + 1e-12) for a, bb in zip(self.ratios, self.beta_bounds))

    def to_dict(self):
        return {"eta": self.eta, "alpha": self.alpha, "b": self.b, "orders": self.orders,
                "ratios": self.ratios, "beta_bounds": self.beta_bounds, "a_max": self.a_max,
                "flagged": self.flagged, "holds": self.holds}


def lemma7_check(table, eta, ps, alpha, b=None, t=0.0, interpolate=False):
    """Smallest A with S_p <= A Gamma(p + a/2 + 2b) Z_p at each p, plus the beta-sum bound."""
    b = table.b if b is None else b
    if table.b is not None and abs(table.b - b) > 1e-15:
        raise ValueError("b differs from the table's normalisation parameter")
    tab = table if table.b is not None else normalize(table, b)
    eta = as_multi_index(eta, table.n)
    ratios, bounds, flagged = [], [], []
    for p in ps:
        S = s_p(tab, eta, p, alpha, t, interpolate)
        Z = z_cap(tab, eta, p, alpha, t, interpolate)
        bounds.append(beta_sum(p, alpha, b))
        if Z <= 0.0:
            ratios.append(None)
            flagged.append({"p": p, "reason": "Z_p = 0"})
            continue
        ratios.append(S / (math.exp(gammaln(p + alpha / 2.0 + 2.0 * b)) * Z))
    return ProductRatioReport(eta.label(), float(alpha), float(b), [float(p) for p in ps], ratios, bounds,
                        flagged)


def low_order_check(table, eta, alpha, t=0.0):
    """(lhs, rhs, holds) for delta^eta z_{1+a/2} <= 1 + delta^eta z_{3/2}."""
    lhs = table.z(eta, 1.0 + alpha / 2.0, t)
    rhs = 1.0 + table.z(eta, 1.5, t)
    return lhs, rhs, bool(lhs <= rhs)


# ---------------------------------------------------------------------------
# geometric bounds
# ---------------------------------------------------------------------------


@dataclass
class GeometricBound:
    K: float
    Q: float
    p_grid: list
    residuals: list
    geometric: bool = True
    increment_slope: float = 0.0

    def bound(self, p):
        return self.K * self.Q ** p

    def to_dict(self):
        return {"K": self.K, "Q": self.Q, "p_grid": self.p_grid, "residuals": self.residuals,
                "geometric": self.geometric, "increment_slope": self.increment_slope}


def fit_geometric_bound(values, nu=None, p_grid=None, t=0.0, flag_tol=1e-6):
    """Envelope z_p <= K Q^p on ``p_grid``.

    ``values`` is either a normalised MomentTable (with ``nu``) or a mapping p -> z_p.
    A least-squares line through log z_p gives Q; K is then raised until every
    residual log z_p - log(K Q^p) is <= 0. Data whose log-increments keep growing
    (factorial-type) are flagged as non-geometric.
    """
    if isinstance(values, MomentTable):
        p_grid = list(p_grid) if p_grid is not None else values.orders(nu, t)
        z = np.array([values.z(nu, p, t) for p in p_grid])
    else:
        p_grid = list(p_grid) if p_grid is not None else sorted(values)
        z = np.array([values[p] for p in p_grid])
    if len(p_grid) < 4:
        raise ValueError("geometric fit needs at least 4 grid points")
    if np.any(z <= 0.0):
        raise ValueError("geometric fit needs positive values")
    ps = np.asarray(p_grid, dtype=float)
    lz = np.log(z)
    slope, icpt = np.polyfit(ps, lz, 1)
    resid = lz - (slope * ps + icpt)
    icpt += resid.max()
    resid = lz - (slope * ps + icpt)
    inc = np.diff(lz) / np.diff(ps)
    inc_slope = float(np.polyfit(ps[1:], inc, 1)[0]) if len(inc) >= 2 else 0.0
    scale = max(1.0, float(np.max(np.abs(inc))))
    geometric = inc_slope <= flag_tol * scale
    return GeometricBound(float(math.exp(icpt)), float(math.exp(slope)), [float(p) for p in ps],
                          [float(r) for r in resid], bool(geometric), inc_slope)


# ---------------------------------------------------------------------------
# tail order
# ---------------------------------------------------------------------------


@dataclass
class TailEstimate:
    s: float
    r_bar: float
    method: str
    horizon: object = None
    rho: float = math.nan
    loglog_slope: float = math.nan
    ks: list = field(default_factory=list)

    def to_dict(self):
        def enc(x):
            return "inf" if x == math.inf else x
        return {"s": self.s, "r_bar": enc(self.r_bar), "method": self.method,
                "horizon": self.horizon, "rho": enc(self.rho),
                "loglog_slope": self.loglog_slope, "ks": self.ks}


def series_ratios(ms):
    """rho_k = (m_{k+1} / (k+1)!) / (m_k / k!) for a sequence m_0, m_1, ... of series moments."""
    ms = np.asarray(ms, dtype=float)
    k = np.arange(len(ms) - 1)
    return ms[1:] / (ms[:-1] * (k + 1.0))


def tail_rate_from_sequence(ms, s, window=10, decay_tol=0.25, horizon=None):
    """r_bar from series moments ms[k] = delta m_{sk/2}.

    The radius of convergence of sum_k ms[k] r^k / k! is 1/rho with rho the limit of the
    term ratios. The last ``window`` ratios are fitted to rho + c/(k+1), which removes the
    leading algebraic correction. Ratios that still decay or grow like a power of k
    mean rho = 0 (every r admissible, r_bar = inf) or rho = inf (r_bar = 0).
    """
    rho_k = series_ratios(ms)
    if len(rho_k) < 3:
        raise ValueError("tail estimation needs at least 4 series moments")
    ks = np.arange(len(rho_k))[-window:]
    rk = rho_k[-window:]
    good = rk > 0
    slope = float(np.polyfit(np.log(ks[good] + 1.0), np.log(rk[good]), 1)[0])
    if slope < -decay_tol:
        return TailEstimate(float(s), math.inf, "series-ratio", horizon, 0.0, slope, ks.tolist())
    if slope > decay_tol:
        return TailEstimate(float(s), 0.0, "series-ratio", horizon, math.inf, slope, ks.tolist())
    A = np.stack([np.ones_like(rk), 1.0 / (ks + 1.0)], axis=-1)
    rho, _ = np.linalg.lstsq(A, rk, rcond=None)[0]
    rbar = math.inf if rho <= 0 else 1.0 / rho
    return TailEstimate(float(s), float(rbar), "fit", horizon, float(rho), slope, ks.tolist())


def tail_order_estimate(table, nu, s, k_max=25, window=10, t=0.0, interpolate=False):
    """Estimate the supremal L1 tail rate r_bar_s of delta^nu f from a moment table."""
    nu = as_multi_index(nu, table.n)
    ks = range(k_max + 1)
    ms = []
    for k in ks:
        p = s * k / 2.0
        if not table.has(nu, p, t) and not interpolate:
            break
        ms.append(table.m(nu, p, t, interpolate))
    if len(ms) < window + 1:
        raise ValueError(f"tail estimation needs moments up to k >= {window} (found {len(ms) - 1})")
    return tail_rate_from_sequence(ms, s, window=window, horizon=t)
