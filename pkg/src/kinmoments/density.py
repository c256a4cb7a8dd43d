"""Polynomial-times-Gaussian densities, multi-indices, absolute moments and moment tables.

The family  sum_j c_j P_j(xi - m_j) exp(-|xi - m_j|^2 / (2 T_j))  is closed under
differentiation, which makes it the test bed for every derivative statement.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .quadrature import composite_gauss_legendre


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiIndex:
    orders: tuple

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(int(k) for k in self.orders))
        if any(k < 0 for k in self.orders):
            raise ValueError(f"multi-index entries must be nonnegative: {self.orders}")

    @classmethod
    def zero(cls, n):
        return cls((0,) * n)

    @classmethod
    def unit(cls, n, i, k=1):
        o = [0] * n
        o[i] = k
        return cls(tuple(o))

    @classmethod
    def parse(cls, text):
        return cls(tuple(int(t) for t in str(text).replace(",", ":").split(":") if t != ""))

    @property
    def n(self):
        return len(self.orders)

    @property
    def order(self):
        return sum(self.orders)

    def __le__(self, other):
        return all(a <= b for a, b in zip(self.orders, other.orders))

    def __sub__(self, other):
        return MultiIndex(tuple(a - b for a, b in zip(self.orders, other.orders)))

    def binom(self, nu):
        """Multi-index binomial (eta choose nu), the product of componentwise binomials."""
        return math.prod(math.comb(a, b) for a, b in zip(self.orders, nu.orders))

    def below(self, strict=False):
        """All nu <= eta (excluding eta itself when ``strict``)."""
        out = [MultiIndex(t) for t in itertools.product(*(range(k + 1) for k in self.orders))]
        return [nu for nu in out if not (strict and nu == self)]

    def label(self):
        return ":".join(str(k) for k in self.orders)

    def __str__(self):
        return self.label()


def as_multi_index(eta, n=None):
    if isinstance(eta, MultiIndex):
        return eta
    if eta is None or eta == 0:
        return MultiIndex.zero(n)
    if isinstance(eta, str):
        return MultiIndex.parse(eta)
    return MultiIndex(tuple(eta))


# ---------------------------------------------------------------------------
# polynomial x Gaussian family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    coef: float
    poly: tuple          # ((exponent tuple, coefficient), ...) in shifted variable x = xi - center
    center: tuple
    width: float         # T, the Gaussian "temperature"

    def poly_dict(self):
        return dict(self.poly)


def _freeze(poly):
    return tuple(sorted((tuple(int(e) for e in k), float(v)) for k, v in poly.items() if v != 0.0))


def _gauss_1d_moment(k, T):
    """int x^k exp(-x^2 / 2T) dx."""
    if k % 2:
        return 0.0
    return math.sqrt(2.0 * math.pi * T) * T ** (k // 2) * math.prod(range(k - 1, 0, -2))


class PolyGaussianDensity:
    """Finite sum of polynomial x Gaussian terms in R^n. Immutable."""

    def __init__(self, terms, n):
        self.n = int(n)
        cleaned = []
        for t in terms:
            if t.width <= 0.0:
                raise ValueError("every term needs a positive width")
            if len(t.center) != self.n:
                raise ValueError("term center has wrong dimension")
            if t.coef != 0.0 and t.poly:
                cleaned.append(t)
        self.terms = tuple(cleaned)

    # -- construction -----------------------------------------------------

    @classmethod
    def maxwellian(cls, n, temperature=1.0, mass=1.0, center=None):
        """mass * (2 pi T)^(-n/2) exp(-|xi - center|^2 / 2T)."""
        c = tuple(np.zeros(n) if center is None else np.asarray(center, dtype=float))
        coef = mass * (2.0 * math.pi * temperature) ** (-n / 2.0)
        return cls([Term(coef, (((0,) * n, 1.0),), c, float(temperature))], n)

    @classmethod
    def gaussian_weight(cls, n, r):
        """M_r(xi) = exp(-r |xi|^2)."""
        if r <= 0:
            raise ValueError("M_r needs r > 0 to be a member of the family")
        return cls([Term(1.0, (((0,) * n, 1.0),), (0.0,) * n, 1.0 / (2.0 * r))], n)

    @classmethod
    def single(cls, n, poly, temperature=1.0, coef=1.0, center=None):
        c = tuple(np.zeros(n) if center is None else np.asarray(center, dtype=float))
        return cls([Term(float(coef), _freeze(poly), c, float(temperature))], n)

    def __add__(self, other):
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return PolyGaussianDensity(self.terms + other.terms, self.n)

    def scale(self, c):
        return PolyGaussianDensity([Term(t.coef * c, t.poly, t.center, t.width)
                                    for t in self.terms], self.n)

    def __mul__(self, c):
        return self.scale(float(c))

    __rmul__ = __mul__

    def times_monomial(self, kappa):
        """xi^kappa * d, re-expanded in each term's shifted variable."""
        kappa = tuple(kappa)
        out = []
        for t in self.terms:
            poly = {}
            # (x + m)^kappa expanded per axis
            factors = []
            for i, k in enumerate(kappa):
                factors.append([(j, math.comb(k, j) * t.center[i] ** (k - j)) for j in range(k + 1)])
            for combo in itertools.product(*factors):
                shift = tuple(j for j, _ in combo)
                cc = math.prod(c for _, c in combo)
                if cc == 0.0:
                    continue
                for e, v in t.poly:
                    key = tuple(a + b for a, b in zip(e, shift))
                    poly[key] = poly.get(key, 0.0) + cc * v
            out.append(Term(t.coef, _freeze(poly), t.center, t.width))
        return PolyGaussianDensity(out, self.n)

    # -- evaluation -------------------------------------------------------

    def _term_parts(self, t, xi):
        x = xi - np.asarray(t.center)
        p = np.zeros(xi.shape[:-1])
        for e, v in t.poly:
            mono = v
            for i, k in enumerate(e):
                if k:
                    mono = mono * x[..., i] ** k
            p = p + mono
        return t.coef * p, -np.sum(x * x, axis=-1) / (2.0 * t.width)

    def __call__(self, xi):
        return self.evaluate(xi)

    def evaluate(self, xi, log_shift=None):
        """d(xi) * exp(log_shift), with the shift combined inside each exponent."""
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1])
        for t in self.terms:
            p, ex = self._term_parts(t, xi)
            if log_shift is not None:
                ex = ex + log_shift
            out = out + p * np.exp(ex)
        return out

    def log_abs(self, xi):
        """log |d(xi)|, stable far in the tail."""
        xi = np.asarray(xi, dtype=float)
        parts = [self._term_parts(t, xi) for t in self.terms]
        if not parts:
            return np.full(xi.shape[:-1], -np.inf)
        top = np.max(np.stack([ex for _, ex in parts]), axis=0)
        s = np.zeros(xi.shape[:-1])
        for p, ex in parts:
            s = s + p * np.exp(ex - top)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(s)) + top

    # -- exact integrals --------------------------------------------------

    def signed_moment(self, kappa=None):
        """Exact int xi^kappa d(xi) dxi."""
        kappa = (0,) * self.n if kappa is None else tuple(kappa)
        total = 0.0
        for t in self.times_monomial(kappa).terms:
            for e, v in t.poly:
                total += t.coef * v * math.prod(_gauss_1d_moment(k, t.width) for k in e)
        return total

    def mass(self):
        return self.signed_moment()

    def momentum(self):
        return np.array([self.signed_moment(MultiIndex.unit(self.n, i).orders)
                         for i in range(self.n)])

    def energy(self):
        """Exact int |xi|^2 d(xi)."""
        return sum(self.signed_moment(MultiIndex.unit(self.n, i, 2).orders) for i in range(self.n))

    # -- structure --------------------------------------------------------

    @property
    def max_width(self):
        return max(t.width for t in self.terms)

    @property
    def min_width(self):
        return min(t.width for t in self.terms)

    @property
    def max_center(self):
        return max(float(np.linalg.norm(t.center)) for t in self.terms)

    @property
    def degree(self):
        return max(sum(e) for t in self.terms for e, _ in t.poly)

    def is_isotropic(self, samples=6, seed=7):
        if any(np.any(np.asarray(t.center) != 0.0) for t in self.terms):
            return False
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(samples, self.n))
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
        radii = np.array([0.3, 1.1, 2.2])
        vals = self.evaluate(radii[:, None, None] * x[None])
        return bool(np.allclose(vals, vals[:, :1], rtol=1e-10, atol=1e-300))

    def truncation_radius(self, p=0.0, rel=1e-14):
        """Radius beyond which r^(2p+n-1) |d| stays below ``rel`` of its peak envelope."""
        r = np.linspace(0.0, 1.0, 4001) * (self.max_center + 60.0 * math.sqrt(self.max_width) + 10.0)
        env = np.full_like(r, -np.inf)
        for t in self.terms:
            mc = float(np.linalg.norm(t.center))
            amp = abs(t.coef) * sum(abs(v) for _, v in t.poly)
            deg = max(sum(e) for e, _ in t.poly)
            near = np.maximum(r - mc, 0.0)
            with np.errstate(divide="ignore"):
                e = (math.log(amp) + deg * np.log(np.maximum(r + mc, 1e-300))
                     - near ** 2 / (2.0 * t.width))
            env = np.logaddexp(env, e)
        with np.errstate(divide="ignore"):
            env = env + (2.0 * p + self.n - 1) * np.log(np.maximum(r, 1e-300))
        keep = np.nonzero(env >= env.max() + math.log(rel))[0]
        return float(r[min(keep[-1] + 1, len(r) - 1)])

    def __repr__(self):
        return f"PolyGaussianDensity(n={self.n}, terms={len(self.terms)})"


def _diff_term(t, axis):
    poly = {}
    T = t.width
    for e, v in t.poly:
        k = e[axis]
        if k:
            key = list(e)
            key[axis] -= 1
            key = tuple(key)
            poly[key] = poly.get(key, 0.0) + k * v
        key = list(e)
        key[axis] += 1
        key = tuple(key)
        poly[key] = poly.get(key, 0.0) - v / T
    return Term(t.coef, _freeze(poly), t.center, t.width)


def differentiate(d, eta):
    """Exact partial derivative d^eta of a PolyGaussianDensity."""
    eta = as_multi_index(eta, d.n)
    terms = list(d.terms)
    for axis, k in enumerate(eta.orders):
        for _ in range(k):
            terms = [_diff_term(t, axis) for t in terms]
    return PolyGaussianDensity(terms, d.n)


def gaussian_moment(n, p, temperature=1.0, mass=1.0):
    """m_p of a centred Maxwellian: mass (2T)^p Gamma(p + n/2) / Gamma(n/2)."""
    return mass * math.exp(p * math.log(2.0 * temperature) + gammaln(p + n / 2.0) - gammaln(n / 2.0))


# ---------------------------------------------------------------------------
# absolute moments by radial shells
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShellRule:
    """Angular product rule plus radial shell layout for integrals of |d| |xi|^2p.

    The polar axis is e_1 and the polar panels break at the equator, so nodal planes
    xi_1 = 0 sit on panel edges.
    """

    n: int
    dirs: np.ndarray
    dir_weights: np.ndarray
    shells: int = 64
    radial_order: int = 10


def build_shell_rule(n, shells=64, radial_order=10, polar_panels=16, polar_order=8, azimuth=64):
    if n == 2:
        th, wt = composite_gauss_legendre(np.linspace(0.0, 2.0 * math.pi, 4 * polar_panels + 1),
                                          polar_order)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return ShellRule(2, dirs, wt, shells, radial_order)
    # polar angle, not its cosine: sin(theta) factors in |d| stay smooth at the poles
    th, wth = composite_gauss_legendre(np.linspace(0.0, math.pi, polar_panels + 1), polar_order)
    c, wc = np.cos(th), wth * np.sin(th)
    # azimuth panels break at multiples of pi/4 so the planes xi_2 = 0 and xi_3 = 0 are edges
    phi, wphi = composite_gauss_legendre(np.linspace(0.0, 2.0 * math.pi, 9), max(1, azimuth // 8))
    s = np.sin(th)
    dirs = np.stack([
        np.repeat(c, len(phi)),
        (s[:, None] * np.cos(phi)[None, :]).ravel(),
        (s[:, None] * np.sin(phi)[None, :]).ravel(),
    ], axis=-1)
    w = (wc[:, None] * wphi[None, :]).ravel()
    return ShellRule(3, dirs, w, shells, radial_order)


_DEFAULT_SHELLS = {}


def default_shell_rule(n):
    if n not in _DEFAULT_SHELLS:
        _DEFAULT_SHELLS[n] = build_shell_rule(n)
    return _DEFAULT_SHELLS[n]


def _angular_profile(d, radii, rule, chunk=24):
    out = np.empty(len(radii))
    for s in range(0, len(radii), chunk):
        r = radii[s:s + chunk]
        pts = r[:, None, None] * rule.dirs[None, :, :]
        out[s:s + chunk] = np.abs(d(pts)) @ rule.dir_weights
    return out


def _radial_pass(d, ps, R, rule, shells):
    r, w = composite_gauss_legendre(np.linspace(0.0, R, shells + 1), rule.radial_order)
    prof = _angular_profile(d, r, rule)
    logr = np.log(r)
    return np.array([float(np.sum(w * prof * np.exp((2.0 * p + d.n - 1) * logr))) for p in ps])


def abs_moments(d, ps, rule=None, tol=1e-8, max_refine=3):
    """delta m_p = int |d(xi)| |xi|^(2p) dxi for every p in ``ps``.

    Radial shells are doubled until successive passes agree to ``tol`` (relative);
    a RuntimeWarning is emitted if that does not happen within ``max_refine`` doublings.
    """
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    if np.any(ps < 0):
        raise ValueError("moment order must be >= 0")
    rule = default_shell_rule(d.n) if rule is None else rule
    if rule.n != d.n:
        raise ValueError("shell rule dimension does not match density")
    R = max(d.truncation_radius(float(p)) for p in (ps.min(), ps.max()))
    shells = rule.shells
    prev = _radial_pass(d, ps, R, rule, shells)
    for _ in range(max_refine):
        shells *= 2
        cur = _radial_pass(d, ps, R, rule, shells)
        err = np.abs(cur - prev) / np.maximum(np.abs(cur), 1e-300)
        prev = cur
        if np.all(err <= tol):
            return cur
    warnings.warn(f"abs_moments: radial refinement stalled (rel err {err.max():.2e} > {tol:.1e})",
                  RuntimeWarning, stacklevel=2)
    return prev


def abs_moment(d, p, rule=None, tol=1e-8):
    return float(abs_moments(d, [p], rule=rule, tol=tol)[0])


def tail_ratio_sup(d, r, weight_power=0, r_max=40.0, radial_points=4001, direction_order=8):
    """sup |d(xi)| / ((1+|xi|^2)^(w/2) exp(-r |xi|^2)) on a polar grid.

    Returns math.inf when the ratio is still growing at the edge of the grid by more
    than a factor e over its inner maximum.
    """
    from .quadrature import build_sphere_rule

    dirs, _ = build_sphere_rule(d.n, direction_order)
    axes = np.concatenate([np.eye(d.n), -np.eye(d.n)])
    dirs = np.concatenate([dirs, axes])
    rad = np.linspace(0.0, r_max, radial_points)
    pts = rad[:, None, None] * dirs[None, :, :]
    lr = d.log_abs(pts) - 0.5 * weight_power * np.log1p(rad ** 2)[:, None] + r * (rad ** 2)[:, None]
    half = rad <= 0.5 * r_max
    inner = np.max(lr[half])
    edge = lr[-1]
    rising = lr[-1] > lr[-2]
    if np.any((edge > inner + 1.0) & rising):
        return math.inf
    return float(np.exp(np.max(lr)))


# ---------------------------------------------------------------------------
# moment tables
# ---------------------------------------------------------------------------


def _key(nu, p, t):
    return (as_multi_index(nu).orders, round(float(p), 12), round(float(t), 12))


@dataclass
class MomentTable:
    """Values delta^nu m_p(t); normalised delta^nu z_p = m / Gamma(p + b) when ``b`` is set."""

    n: int
    entries: dict = field(default_factory=dict)
    b: float | None = None
    alpha: float | None = None
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def set(self, nu, p, t, value):
        if not value >= 0.0:
            raise ValueError(f"moment values must be nonnegative (got {value} at nu={nu}, p={p})")
        self.entries[_key(nu, p, t)] = float(value)

    def has(self, nu, p, t=0.0):
        return _key(nu, p, t) in self.entries

    def orders(self, nu=None, t=0.0):
        nu = None if nu is None else as_multi_index(nu).orders
        return sorted({k[1] for k in self.entries if (nu is None or k[0] == nu)
                       and k[2] == round(float(t), 12)})

    def times(self):
        return sorted({k[2] for k in self.entries})

    def indices(self):
        return sorted({k[0] for k in self.entries})

    def m(self, nu, p, t=0.0, interpolate=False):
        k = _key(nu, p, t)
        if k in self.entries:
            return self.entries[k]
        if not interpolate:
            raise KeyError(f"missing moment entry nu={as_multi_index(nu).label()}, p={p}, t={t}")
        return self._interpolate(nu, p, t)

    def _interpolate(self, nu, p, t):
        ps = self.orders(nu, t)
        lo = [q for q in ps if q < p]
        hi = [q for q in ps if q > p]
        if not lo or not hi:
            raise KeyError(f"cannot interpolate nu={as_multi_index(nu).label()}, p={p}: no bracket")
        p0, p1 = lo[-1], hi[0]
        th = (p - p0) / (p1 - p0)
        v0, v1 = self.m(nu, p0, t), self.m(nu, p1, t)
        self.flags.append({"interpolated": [as_multi_index(nu).label(), p, t]})
        if v0 <= 0.0 or v1 <= 0.0:
            return 0.0
        # Hoelder: log m_p is convex in p, so the chord is an upper bound
        return math.exp((1.0 - th) * math.log(v0) + th * math.log(v1))

    def z(self, nu, p, t=0.0, interpolate=False):
        if self.b is None:
            raise ValueError("table has no normalisation parameter b")
        return self.m(nu, p, t, interpolate) / math.gamma(p + self.b)

    def rows(self):
        for (nu, p, t), v in sorted(self.entries.items()):
            z = v / math.gamma(p + self.b) if self.b is not None else float("nan")
            yield MultiIndex(nu).label(), p, t, v, z, self.b

    def to_csv(self, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["nu", "p", "t", "m", "z", "b"])
        for nu, p, t, v, z, b in self.rows():
            w.writerow([nu, repr(float(p)), repr(float(t)), repr(float(v)), repr(float(z)),
                        "" if b is None else repr(float(b))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, n=None):
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        rd = csv.DictReader(lines)
        tab = None
        for row in rd:
            nu = MultiIndex.parse(row["nu"])
            if tab is None:
                b = float(row["b"]) if row.get("b") else None
                tab = cls(n or nu.n, b=b)
            tab.set(nu, float(row["p"]), float(row["t"]), float(row["m"]))
        if tab is None:
            raise ValueError("empty moment table")
        return tab

    def to_json(self):
        return json.dumps({"n": self.n, "b": self.b, "alpha": self.alpha, "meta": self.meta,
                           "flags": self.flags,
                           "rows": [dict(zip(("nu", "p", "t", "m", "z", "b"), r)) for r in self.rows()]},
                          indent=2, sort_keys=True)


def moment_table_from_density(d, eta, orders, b=None, alpha=None, t=0.0, rule=None, table=None):
    """Fill delta^nu m_p(t) for every nu <= eta and p in ``orders`` by direct quadrature."""
    eta = as_multi_index(eta, d.n)
    tab = table if table is not None else MomentTable(d.n, b=b, alpha=alpha)
    for nu in eta.below():
        vals = abs_moments(differentiate(d, nu), orders, rule=rule)
        for p, v in zip(orders, vals):
            tab.set(nu, p, t, v)
    return tab
