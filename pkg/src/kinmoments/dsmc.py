"""Nanbu-Babovsky particle solver for the space-homogeneous Boltzmann equation with VHS kernels."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln
from scipy.stats import gaussian_kde

from .density import MomentTable, MultiIndex, PolyGaussianDensity
from .quadrature import build_jacobi_rule, sphere_area

TABLE_SIZE = 4096


class MajorantViolation(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# angular law
# ---------------------------------------------------------------------------


@dataclass
class AngularSampler:
    """Inverse-CDF table for z = u_hat . sigma with density omega_{n-2} h_bar(z) (1 - z^2)^((n-3)/2).

    The table lives in theta = arccos(-z) so the endpoint factors sin(theta)^(2a+1) are
    integrated cell by cell with Jacobi rules carrying the singular power.
    """

    theta: np.ndarray      # cell edges on [0, pi]
    cdf: np.ndarray        # cumulative mass at the edges, cdf[-1] == 1
    total: float           # mass before renormalisation (1 for a normalised h)

    def sample(self, rng, size):
        u = rng.random(size)
        j = np.clip(np.searchsorted(self.cdf, u, side="right") - 1, 0, len(self.cdf) - 2)
        lo, hi = self.cdf[j], self.cdf[j + 1]
        frac = np.where(hi > lo, (u - lo) / np.where(hi > lo, hi - lo, 1.0), 0.5)
        th = self.theta[j] + frac * (self.theta[j + 1] - self.theta[j])
        return -np.cos(th)

    def cdf_z(self, z):
        """Tabulated CDF at z (piecewise linear in theta)."""
        th = np.arccos(-np.clip(np.asarray(z, dtype=float), -1.0, 1.0))
        return np.interp(th, self.theta, self.cdf)


def build_angular_sampler(cs, size=TABLE_SIZE, order=8):
    n = cs.n
    e = 2.0 * cs.folded_exponent + 1.0          # power of sin(theta) after dz = sin dtheta
    theta = np.linspace(0.0, math.pi, size + 1)
    mass = np.empty(size)
    leg = build_jacobi_rule(order, 0.0, 0.0)
    left = build_jacobi_rule(order, 0.0, e)      # weight (1 + x)^e: singular at the cell's left end
    right = build_jacobi_rule(order, e, 0.0)
    for j in range(size):
        t0, t1 = theta[j], theta[j + 1]
        half = 0.5 * (t1 - t0)
        if j == 0 or j == size - 1:
            rule = left if j == 0 else right
            t = t0 + half * (rule.nodes + 1.0)
            dist = t - t0 if j == 0 else t1 - t
            # sin(t)^e = dist^e (sin(t)/dist)^e; dist^e = half^e (1 +/- x)^e sits in the weight
            reg = (np.sin(t) / dist) ** e
            mass[j] = half ** (1.0 + e) * np.sum(rule.weights * reg * cs.smooth_bar(-np.cos(t)))
        else:
            t = t0 + half * (leg.nodes + 1.0)
            mass[j] = half * np.sum(leg.weights * np.sin(t) ** e * cs.smooth_bar(-np.cos(t)))
    mass *= sphere_area(n - 2)
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    total = float(cdf[-1])
    return AngularSampler(theta, cdf / total, total)


def z_density(cs, z):
    """Probability density of z = u_hat . sigma."""
    z = np.asarray(z, dtype=float)
    return sphere_area(cs.n - 2) * cs.smooth_bar(z) * (1.0 - z * z) ** cs.folded_exponent


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------


@dataclass
class ParticleEnsemble:
    velocities: np.ndarray
    kernel: object
    rng: np.random.Generator
    time: float = 0.0
    sampler: AngularSampler | None = None
    collisions: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sampler is None:
            self.sampler = build_angular_sampler(self.kernel.cross_section)

    @property
    def N(self):
        return self.velocities.shape[0]

    @property
    def n(self):
        return self.velocities.shape[1]

    @property
    def weights(self):
        return np.full(self.N, 1.0 / self.N)

    def mass(self):
        return 1.0

    def momentum(self):
        return self.velocities.mean(axis=0)

    def energy(self):
        """Empirical m_1 = mean |xi|^2."""
        return float(np.mean(np.sum(self.velocities ** 2, axis=1)))

    def moment(self, p):
        return float(np.mean(np.sum(self.velocities ** 2, axis=1) ** p))

    def moment_stderr(self, p):
        v = np.sum(self.velocities ** 2, axis=1) ** p
        return float(np.std(v, ddof=1) / math.sqrt(self.N))


def _proposal(d):
    """Gaussian proposal (center, temperature) wider than every term of d."""
    cs = np.array([t.center for t in d.terms])
    c = cs.mean(axis=0)
    spread = float(np.max(np.sum((cs - c) ** 2, axis=1)))
    return c, 1.5 * d.max_width + spread + 1e-12


def init_from_density(d, N, seed, kernel, batch=None, min_efficiency=1e-4):
    """N i.i.d. samples of a nonnegative unit-mass PolyGaussianDensity by rejection."""
    if not isinstance(d, PolyGaussianDensity):
        raise TypeError("init_from_density needs a PolyGaussianDensity")
    if abs(d.mass() - 1.0) > 1e-10:
        raise ValueError(f"initial density must have mass 1 (got {d.mass()})")
    rng = np.random.default_rng(seed)
    n = d.n
    c, Tp = _proposal(d)
    log_norm = -0.5 * n * math.log(2.0 * math.pi * Tp)

    def g(x):
        return np.exp(log_norm - np.sum((x - c) ** 2, axis=1) / (2.0 * Tp))

    probe = c + math.sqrt(Tp) * rng.standard_normal((200_000, n))
    probe = np.vstack([probe, np.array([t.center for t in d.terms])])
    vals = d(probe)
    if np.min(vals) < -1e-12 * np.max(vals):
        raise ValueError("initial density takes negative values")
    M = 1.25 * float(np.max(vals / g(probe)))
    if 1.0 / M < min_efficiency:
        raise RuntimeError(f"rejection efficiency {1.0 / M:.2e} below {min_efficiency:g}")
    batch = batch or max(1024, int(1.3 * N * M))
    out, have = [], 0
    while have < N:
        x = c + math.sqrt(Tp) * rng.standard_normal((batch, n))
        ratio = d(x) / (M * g(x))
        if np.any(ratio > 1.0):
            raise RuntimeError("rejection envelope violated; density has a sharper peak than probed")
        keep = x[rng.random(batch) < ratio]
        out.append(keep)
        have += len(keep)
    v = np.vstack(out)[:N]
    e = ParticleEnsemble(v, kernel, rng)
    e.meta.update({"seed": int(seed), "N": int(N), "rejection_efficiency": 1.0 / M})
    return e


def majorant(e):
    """Rigorous bound Lambda >= |xi_i - xi_j|^alpha: |u| <= 2 max |xi - mean|."""
    v = e.velocities
    r = float(np.sqrt(np.max(np.sum((v - v.mean(axis=0)) ** 2, axis=1))))
    return (2.0 * r) ** e.kernel.alpha


def mean_free_time(e, pairs=200_000):
    """1 / E|u|^alpha estimated from random pairs drawn with a fixed stream (leaves e.rng untouched)."""
    rng = np.random.default_rng(12345)
    i = rng.integers(0, e.N, pairs)
    j = rng.integers(0, e.N, pairs)
    u = np.sqrt(np.sum((e.velocities[i] - e.velocities[j]) ** 2, axis=1))
    return 1.0 / float(np.mean(u ** e.kernel.alpha))


def random_perpendicular(uhat, rng):
    """Uniform unit vectors orthogonal to each row of ``uhat``."""
    g = rng.standard_normal(uhat.shape)
    g -= np.sum(g * uhat, axis=1, keepdims=True) * uhat
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def collide_pairs(v1, v2, sampler, rng):
    """Post-collision velocities V +/- |u| sigma / 2 with sigma drawn from the angular law."""
    V = 0.5 * (v1 + v2)
    u = v1 - v2
    un = np.linalg.norm(u, axis=1, keepdims=True)
    safe = np.where(un > 0, un, 1.0)
    uhat = u / safe
    zero = un[:, 0] == 0
    if np.any(zero):
        uhat[zero] = 0.0
        uhat[zero, 0] = 1.0
    z = sampler.sample(rng, len(u))[:, None]
    w = random_perpendicular(uhat, rng)
    sigma = z * uhat + np.sqrt(np.maximum(1.0 - z * z, 0.0)) * w
    half = 0.5 * un * sigma
    return V + half, V - half, z[:, 0]


def step(e, dt):
    """One Nanbu-Babovsky sweep: random disjoint pairs, candidates with probability dt Lambda,
    acceptance |u|^alpha / Lambda."""
    lam = majorant(e)
    if dt * lam >= 0.5:
        raise ValueError(f"dt = {dt} too large for majorant {lam:.3g} (need dt Lambda < 0.5)")
    rng = e.rng
    perm = rng.permutation(e.N)
    m = e.N // 2
    i, j = perm[:m], perm[m:2 * m]
    cand = rng.random(m) < dt * lam
    i, j = i[cand], j[cand]
    v = e.velocities
    u = np.linalg.norm(v[i] - v[j], axis=1) ** e.kernel.alpha
    if np.any(u > lam * (1.0 + 1e-12)):
        raise MajorantViolation("relative speed exceeds the majorant")
    acc = rng.random(len(i)) < u / lam
    i, j = i[acc], j[acc]
    if len(i):
        a, b, _ = collide_pairs(v[i], v[j], e.sampler, rng)
        v[i], v[j] = a, b
    e.collisions += len(i)
    e.time += dt
    return e


def run(e, t_end, observe_orders, observe_every, dt=None, dt_fraction=0.1):
    """Advance to t_end, recording empirical m_p at multiples of ``observe_every``.

    dt defaults to ``dt_fraction`` mean free times and is split further when dt Lambda
    would reach 1/2. The returned table carries standard errors, conservation
    diagnostics and the time grid in ``meta``.
    """
    if not t_end >= 0:
        raise ValueError("t_end must be nonnegative")
    n = e.n
    zero = MultiIndex.zero(n)
    tab = MomentTable(n, alpha=e.kernel.alpha, meta={"kind": "dsmc", "N": e.N,
                                                      "seed": e.meta.get("seed")})
    stderr = {}
    e0, mom0 = e.energy(), e.momentum().copy()
    tau = mean_free_time(e)
    dt = dt if dt is not None else dt_fraction * tau

    def observe():
        t = round(e.time, 12)
        for p in observe_orders:
            tab.set(zero, p, t, e.moment(p))
            stderr[f"{p!r}@{t!r}"] = e.moment_stderr(p)

    observe()
    obs_times = [k * observe_every for k in range(1, int(math.floor(t_end / observe_every + 1e-9)) + 1)]
    if t_end > 0 and (not obs_times or abs(obs_times[-1] - t_end) > 1e-12):
        obs_times.append(t_end)
    t0 = e.time
    for target in obs_times:
        target = t0 + target
        while e.time < target - 1e-12:
            h = min(dt, target - e.time)
            lam = majorant(e)
            sub = max(1, int(math.ceil(h * lam / 0.45)))
            for _ in range(sub):
                step(e, h / sub)
        e.time = target
        observe()
    drift = abs(e.energy() - e0) / e0
    tab.meta.update({"stderr": stderr, "energy_drift": drift,
                     "momentum_change": float(np.max(np.abs(e.momentum() - mom0))),
                     "mean_free_time": tau, "dt": dt, "collisions": e.collisions})
    return tab


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def kl_entropy(v, k=1, max_points=20_000, seed=0):
    """Kozachenko-Leonenko estimate of -int f log f from samples."""
    v = np.asarray(v, dtype=float)
    if len(v) > max_points:
        v = v[np.random.default_rng(seed).choice(len(v), max_points, replace=False)]
    N, n = v.shape
    dist, _ = cKDTree(v).query(v, k=k + 1)
    eps = dist[:, -1]
    log_vn = 0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0)
    return float(digamma(N) - digamma(k) + log_vn + n * np.mean(np.log(eps)))


def maxwellian_lower_bound(v, radius=3.0, points=200, seed=0, max_points=50_000):
    """(c, r0) with a kernel density estimate of f >= c exp(-r0 |xi|^2) on |xi| <= radius.

    r0 is 1.5 times the Maxwellian rate of the empirical temperature, c the smallest
    ratio over probe points: the origin plus random directions on evenly spaced shells
    up to ``radius`` (the ratio is smallest near the origin when f is close to Maxwellian).
    """
    v = np.asarray(v, dtype=float)
    rng = np.random.default_rng(seed)
    if len(v) > max_points:
        v = v[rng.choice(len(v), max_points, replace=False)]
    n = v.shape[1]
    T = float(np.mean(np.sum((v - v.mean(axis=0)) ** 2, axis=1))) / n
    r0 = 1.5 / (2.0 * T)
    shells = 20
    per = max(1, points // shells)
    x = rng.standard_normal((shells * per, n))
    rad = np.repeat(radius * np.arange(1, shells + 1) / shells, per)
    x *= (rad / np.linalg.norm(x, axis=1))[:, None]
    x = np.vstack([np.zeros((1, n)), x])
    fhat = gaussian_kde(v.T)(x.T)
    c = float(np.min(fhat * np.exp(r0 * np.sum(x * x, axis=1))))
    return c, r0


def chi_square_angular(cs, z_samples, bins=40):
    """(statistic, p-value) of sampled z against the angular law, with bin masses from
    an independent adaptive integration of the z-density."""
    from scipy.stats import chisquare

    from .quadrature import adaptive_integrate

    a = cs.folded_exponent
    edges = -np.cos(np.linspace(0.0, math.pi, bins + 1))

    def dens_theta(t):
        # density in theta: z_density(-cos t) sin t
        t = np.asarray(t, dtype=float)
        return sphere_area(cs.n - 2) * cs.smooth_bar(-np.cos(t)) * np.sin(t) ** (2.0 * a + 1.0)

    th = np.linspace(0.0, math.pi, bins + 1)
    probs = np.array([adaptive_integrate(dens_theta, th[k], th[k + 1], tol=1e-12, rel_tol=1e-10,
                                         max_intervals=4000).value for k in range(bins)])
    probs /= probs.sum()
    counts, _ = np.histogram(z_samples, bins=edges)
    res = chisquare(counts, probs * counts.sum())
    return float(res.statistic), float(res.pvalue)
