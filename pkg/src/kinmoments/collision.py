"""Weak-form collision functionals, the averaging operators A+/-, pointwise gain and the loss convolution.

Velocity pair integrals use block rules: each pair of Gaussian groups (centre, width)
of the two factors gets its own centre-of-mass / relative-velocity rule, which keeps
polynomial x Gaussian integrands exact in V and absorbs |u|^alpha into the radial weights.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .density import MultiIndex, PolyGaussianDensity, as_multi_index, differentiate
from .kernel import CollisionKernel
from .quadrature import (build_block_pair_rule, build_graded_jacobi_rule, build_jacobi_rule,
                         build_sigma_rule, build_sphere_rule, composite_gauss_legendre,
                         graded_breaks, sigma_directions)

_CHUNK = 1 << 21   # sigma-expanded points per evaluation chunk


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """phi(xi). Kinds: power |xi|^(2p), maxwellian exp(-r |xi|^2), component xi_i, custom."""

    __test__ = False   # keep pytest from collecting this class

    kind: str
    p: float | None = None
    r: float | None = None
    axis: int | None = None
    fn: Callable | None = None
    name: str = ""

    @classmethod
    def power(cls, p):
        if p < 0:
            raise ValueError("power test function needs p >= 0")
        return cls("power", p=float(p), name=f"phi_{p:g}")

    @classmethod
    def maxwellian(cls, r):
        return cls("maxwellian", r=float(r), name=f"exp(-{r:g}|xi|^2)")

    @classmethod
    def component(cls, axis):
        return cls("component", axis=int(axis), name=f"xi_{axis}")

    @classmethod
    def custom(cls, fn, name="custom", isotropic=False):
        return cls("custom_iso" if isotropic else "custom", fn=fn, name=name)

    @property
    def isotropic(self):
        return self.kind in ("power", "maxwellian", "custom_iso")

    def radial(self, s):
        """phi as a function of s = |xi|^2 (isotropic kinds only)."""
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        if self.kind == "power":
            if self.p == 0.0:
                return np.ones_like(s)
            if float(self.p).is_integer():
                return s ** int(self.p)
            return s ** self.p
        if self.kind == "maxwellian":
            return np.exp(-self.r * s)
        raise ValueError(f"{self.kind} test function has no radial form")

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind in ("power", "maxwellian"):
            return self.radial(np.sum(xi * xi, axis=-1))
        if self.kind == "component":
            return xi[..., self.axis]
        return np.asarray(self.fn(xi), dtype=float)


def signed_test_function(d, phi):
    """sgn(d) * phi, with sgn(0) = 0."""
    def fn(xi, _d=d, _phi=phi):
        return np.sign(_d(xi)) * _phi(xi)
    return TestFunction.custom(fn, name=f"sgn*{phi.name}")


# ---------------------------------------------------------------------------
# quadrature settings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollisionQuadrature:
    v_order: int = 5         # Hermite points per axis for the centre of mass
    r_order: int = 10        # Laguerre points for |u|
    ang_order: int = 6       # sphere rule order for u_hat
    sigma_order: int = 12    # Jacobi points in z = u_hat . sigma (aligned frame)
    sigma_azimuth: int = 16
    sphere_order: int = 10   # global-frame sphere rule for the e5 gain path

    def finer(self):
        return CollisionQuadrature(self.v_order + 1, self.r_order + 2, self.ang_order + 1,
                                   2 * self.sigma_order, 2 * self.sigma_azimuth,
                                   self.sphere_order + 2)

    def coarser(self):
        return CollisionQuadrature(max(self.v_order - 1, 2), max(self.r_order - 2, 3),
                                   max(self.ang_order - 1, 2), max(self.sigma_order - 4, 3),
                                   max(self.sigma_azimuth - 4, 4), max(self.sphere_order - 2, 3))


DEFAULT_QUAD = CollisionQuadrature()


# ---------------------------------------------------------------------------
# averaging operators
# ---------------------------------------------------------------------------

_SIGMA_CACHE = {}


def _aligned_rule(cs, order, azimuth, graded=False):
    key = (cs.n, cs.folded_exponent, order, azimuth, graded)
    if key not in _SIGMA_CACHE:
        _SIGMA_CACHE[key] = build_sigma_rule(cs.n, cs.folded_exponent, order=order,
                                             azimuth=azimuth, graded=graded)
    return _SIGMA_CACHE[key]


def _unit(u):
    r = np.linalg.norm(u, axis=-1, keepdims=True)
    e = np.zeros_like(u)
    e[..., 0] = 1.0
    return np.where(r > 0.0, u / np.where(r > 0.0, r, 1.0), e), r[..., 0]


def _v_dot_sigma(V, uhat, rule):
    """V . sigma for every aligned sigma node, shape (N, K)."""
    along = np.sum(V * uhat, axis=-1)
    perp = V - along[:, None] * uhat
    sz = np.sqrt(np.clip(1.0 - rule.z * rule.z, 0.0, None))
    if rule.n == 2:
        frame = np.stack([-uhat[:, 1], uhat[:, 0]], axis=-1)
        c1 = np.sum(perp * frame, axis=-1)
        return along[:, None] * rule.z + c1[:, None] * (sz * rule.cos_az)
    # the azimuth origin is arbitrary for the integral, so put it on V_perp
    c1 = np.linalg.norm(perp, axis=-1)
    return along[:, None] * rule.z + c1[:, None] * (sz * rule.cos_az)


def _a_plus_flat(phi, xi, xs, cs, rule):
    out = np.empty(len(xi))
    wz = rule.weights * cs.smooth(rule.z)
    step = max(1, _CHUNK // len(wz))
    for s in range(0, len(xi), step):
        a, b = xi[s:s + step], xs[s:s + step]
        uhat, r = _unit(a - b)
        V = 0.5 * (a + b)
        if phi.isotropic:
            base = np.sum(V * V, axis=-1) + 0.25 * r * r
            cross = r[:, None] * _v_dot_sigma(V, uhat, rule)
            vals = phi.radial(base[:, None] + cross) + phi.radial(base[:, None] - cross)
        else:
            sig = sigma_directions(uhat, rule)
            half = 0.5 * r[:, None, None] * sig
            vals = phi(V[:, None, :] + half) + phi(V[:, None, :] - half)
        out[s:s + step] = vals @ wz
    return out


def a_plus(phi, xi, xi_star, h, quad=DEFAULT_QUAD, rule=None):
    """A+[phi](xi, xi*) = int_S (phi(xi') + phi(xi'*)) h(u_hat . sigma) dsigma.

    The sphere integral uses a product rule in the frame aligned with u_hat: Jacobi
    nodes in z carry both the sphere factor and any singular factor of h, and a
    trapezoid rule covers the azimuth. Works for any phi, isotropic or not.
    Broadcasts over leading dimensions of ``xi`` and ``xi_star``.
    """
    xi = np.asarray(xi, dtype=float)
    xs = np.asarray(xi_star, dtype=float)
    xi, xs = np.broadcast_arrays(xi, xs)
    shape = xi.shape[:-1]
    rule = rule or _aligned_rule(h, quad.sigma_order, quad.sigma_azimuth)
    out = _a_plus_flat(phi, xi.reshape(-1, h.n), xs.reshape(-1, h.n), h, rule)
    return out.reshape(shape) if shape else float(out[0])


def a_minus(phi, xi, xi_star):
    return phi(np.asarray(xi, dtype=float)) + phi(np.asarray(xi_star, dtype=float))


def a_op(phi, xi, xi_star, h, quad=DEFAULT_QUAD, rule=None):
    """A[phi] = A+[phi] - (phi + phi*)."""
    return a_plus(phi, xi, xi_star, h, quad, rule) - a_minus(phi, xi, xi_star)


# ---------------------------------------------------------------------------
# pair integrals
# ---------------------------------------------------------------------------


def _groups(d):
    out = {}
    for t in d.terms:
        key = (tuple(round(c, 14) for c in t.center), round(t.width, 14))
        out.setdefault(key, []).append(t)
    return {k: PolyGaussianDensity(v, d.n) for k, v in out.items()}


class PairIntegrator:
    """Caches block rules and kernel values for int int F(xi) G(xi*) K(xi, xi*) |u|^alpha."""

    def __init__(self, n, alpha, quad=DEFAULT_QUAD):
        self.n = n
        self.alpha = alpha
        self.quad = quad
        self._rules = {}
        self._kvals = {}

    def rule(self, ki, kj):
        key = (ki, kj)
        if key not in self._rules:
            q = self.quad
            self._rules[key] = build_block_pair_rule(self.n, self.alpha, ki[1], kj[1],
                                                     np.array(ki[0]), np.array(kj[0]),
                                                     v_order=q.v_order, r_order=q.r_order,
                                                     ang_order=q.ang_order)
        return self._rules[key]

    def _k(self, kfun, tag, ki, kj, R):
        if tag is None:
            return kfun(R.xi, R.xi_star)
        key = (tag, ki, kj)
        if key not in self._kvals:
            self._kvals[key] = kfun(R.xi, R.xi_star)
        return self._kvals[key]

    def bilinear(self, F, G, kfun, tag=None):
        """Exact term splitting; smooth integrands."""
        total = 0.0
        for ki, Fi in _groups(F).items():
            for kj, Gj in _groups(G).items():
                R = self.rule(ki, kj)
                K = self._k(kfun, tag, ki, kj, R)
                total += float(np.sum(R.weights * Fi(R.xi) * Gj(R.xi_star) * K))
        return total

    def abs_bilinear(self, F, G, kfun, base, tag=None):
        """int int |F(xi) G(xi*)| K with a partition of unity over the groups of ``base``."""
        keys = list(_groups(base).keys())

        def pou(x):
            logs = np.stack([-np.sum((x - np.array(c)) ** 2, axis=-1) / (2.0 * T)
                             - 0.5 * self.n * math.log(T) for c, T in keys])
            logs -= logs.max(axis=0)
            e = np.exp(logs)
            return e / e.sum(axis=0)

        total = 0.0
        for i, ki in enumerate(keys):
            for j, kj in enumerate(keys):
                R = self.rule(ki, kj)
                K = self._k(kfun, tag, ki, kj, R)
                w = R.weights * pou(R.xi)[i] * pou(R.xi_star)[j]
                total += float(np.sum(w * np.abs(F(R.xi) * G(R.xi_star)) * K))
        return total


def _check_pair(f, g, k):
    if f.n != g.n or f.n != k.n:
        raise ValueError("dimension mismatch between densities and kernel")


def _gain_kernels(phi, k, quad):
    """Kernels (xi, xi*) -> 1/2 int h phi(xi') and 1/2 int h phi(xi'*) over sigma."""
    cs = k.cross_section
    if cs.bounded:
        dirs, wd = build_sphere_rule(k.n, quad.sphere_order)

        def make(sign):
            def kern(xi, xs):
                out = np.empty(len(xi))
                step = max(1, _CHUNK // len(wd))
                for s in range(0, len(xi), step):
                    a, b = xi[s:s + step], xs[s:s + step]
                    uhat, r = _unit(a - b)
                    V = 0.5 * (a + b)
                    hz = cs.h(uhat @ dirs.T) * wd
                    if phi.isotropic:
                        sq = (np.sum(V * V, axis=-1) + 0.25 * r * r)[:, None] + sign * r[:, None] * (V @ dirs.T)
                        vals = phi.radial(sq)
                    else:
                        vals = phi(V[:, None, :] + sign * 0.5 * r[:, None, None] * dirs[None, :, :])
                    out[s:s + step] = 0.5 * np.sum(vals * hz, axis=-1)
                return out
            return kern
        return make(1.0), make(-1.0)

    rule = _aligned_rule(cs, quad.sigma_order, quad.sigma_azimuth)
    wz = rule.weights * cs.smooth(rule.z)

    def make_aligned(sign):
        def kern(xi, xs):
            out = np.empty(len(xi))
            step = max(1, _CHUNK // len(wz))
            for s in range(0, len(xi), step):
                a, b = xi[s:s + step], xs[s:s + step]
                uhat, r = _unit(a - b)
                V = 0.5 * (a + b)
                if phi.isotropic:
                    sq = (np.sum(V * V, axis=-1) + 0.25 * r * r)[:, None] + sign * r[:, None] * _v_dot_sigma(V, uhat, rule)
                    vals = phi.radial(sq)
                else:
                    sig = sigma_directions(uhat, rule)
                    vals = phi(V[:, None, :] + sign * 0.5 * r[:, None, None] * sig)
                out[s:s + step] = 0.5 * (vals @ wz)
            return out
        return kern
    return make_aligned(1.0), make_aligned(-1.0)


def weak_gain(f, g, phi, k, quad=DEFAULT_QUAD, integrator=None):
    """Symmetrised gain 1/2 int int f g* int h (phi' + phi'*) dsigma |u|^alpha.

    This is the gain of (Q(f, g) + Q(g, f)) / 2, so the collision invariants are
    conserved for f != g as well; for f = g it is the usual int Q+(f, f) phi.
    """
    _check_pair(f, g, k)
    pi = integrator or PairIntegrator(k.n, k.alpha, quad)
    kp, km = _gain_kernels(phi, k, quad)
    tag = ("gain", id(phi))
    return pi.bilinear(f, g, kp, tag=tag + ("+",)) + pi.bilinear(f, g, km, tag=tag + ("-",))


def weak_loss(f, g, phi, k, quad=DEFAULT_QUAD, integrator=None):
    """Symmetrised loss 1/2 int int f g* (phi + phi*) |u|^alpha."""
    _check_pair(f, g, k)
    pi = integrator or PairIntegrator(k.n, k.alpha, quad)
    tag = ("loss", id(phi))
    return (pi.bilinear(f, g, lambda a, b: 0.5 * phi(a), tag=tag + ("+",))
            + pi.bilinear(f, g, lambda a, b: 0.5 * phi(b), tag=tag + ("-",)))


def weak_q(f, g, phi, k, quad=DEFAULT_QUAD, integrator=None):
    pi = integrator or PairIntegrator(k.n, k.alpha, quad)
    return weak_gain(f, g, phi, k, quad, pi) - weak_loss(f, g, phi, k, quad, pi)


def _a_kernel(phi, k, quad):
    rule = _aligned_rule(k.cross_section, quad.sigma_order, quad.sigma_azimuth)

    def kern(xi, xs):
        return a_op(phi, xi, xs, k.cross_section, quad, rule)
    return kern


def weak_derivative_action(f, eta, phi, k, quad=DEFAULT_QUAD, integrator=None):
    """int d^eta Q(f, f) phi assembled from A[phi]:

    int int f* d^eta f A[phi] |u|^alpha + 1/2 sum_{0<nu<eta} C(eta, nu) int int d^nu f d^(eta-nu) f* A[phi] |u|^alpha.
    """
    eta = as_multi_index(eta, f.n)
    pi = integrator or PairIntegrator(k.n, k.alpha, quad)
    kern = _a_kernel(phi, k, quad)
    tag = ("A", id(phi))
    zero = MultiIndex.zero(f.n)
    if eta == zero:
        # nu = 0 and nu = eta coincide; the symmetric pair collapses to one half term
        return 0.5 * pi.bilinear(f, f, kern, tag=tag)
    total = pi.bilinear(differentiate(f, eta), f, kern, tag=tag)
    for nu in eta.below(strict=True):
        if nu == zero:
            continue
        total += 0.5 * eta.binom(nu) * pi.bilinear(differentiate(f, nu), differentiate(f, eta - nu),
                                                   kern, tag=tag)
    return total


@dataclass
class LeibnizComparison:
    weak_form: float
    bilinear_sum: float
    scale: float

    @property
    def rel_diff(self):
        return abs(self.weak_form - self.bilinear_sum) / max(self.scale, 1e-300)


def leibniz_check(f, eta, phi, k, quad=DEFAULT_QUAD):
    """Compare the A[phi] assembly with sum_nu C(eta, nu) int Q(d^nu f, d^(eta-nu) f) phi.

    The second path uses the gain/loss forms directly (global sphere rule when h is
    bounded). ``scale`` is sum_nu C(eta, nu) int int |d^nu f d^(eta-nu) f*| (|gain| + |loss|)
    kernels, which stays positive when symmetry makes every signed piece vanish.
    """
    eta = as_multi_index(eta, f.n)
    lhs = weak_derivative_action(f, eta, phi, k, quad, PairIntegrator(k.n, k.alpha, quad))
    pi = PairIntegrator(k.n, k.alpha, quad)
    kp, km = _gain_kernels(phi, k, quad)

    def kabs(a, b):
        return np.abs(kp(a, b)) + np.abs(km(a, b)) + 0.5 * (np.abs(phi(a)) + np.abs(phi(b)))

    total, scale = 0.0, 0.0
    for nu in eta.below():
        c = eta.binom(nu)
        F, G = differentiate(f, nu), differentiate(f, eta - nu)
        g = weak_gain(F, G, phi, k, quad, pi)
        lo = weak_loss(F, G, phi, k, quad, pi)
        total += c * (g - lo)
        scale += c * pi.abs_bilinear(F, G, kabs, f, tag=("lscale", id(phi)))
    return LeibnizComparison(lhs, total, scale)


# ---------------------------------------------------------------------------
# signed bound
# ---------------------------------------------------------------------------


@dataclass
class WeakFormReport:
    lhs: float
    rhs: float
    err_estimate: float
    case_id: str = ""
    params: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)
    tolerance: float = 1e-10

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return self.margin >= -(self.tolerance + self.err_estimate)

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "margin": self.margin,
                "err_estimate": self.err_estimate, "case_id": self.case_id,
                "params": self.params, "terms": self.terms, "passed": self.passed}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _signed_bound_once(f, eta, phi, k, quad):
    d_eta = differentiate(f, eta)
    pi = PairIntegrator(k.n, k.alpha, quad)
    lhs = weak_derivative_action(f, eta, signed_test_function(d_eta, phi), k, quad, pi)
    kern_a = _a_kernel(phi, k, quad)
    kern_star = lambda a, b: phi(b)
    t1 = pi.abs_bilinear(d_eta, f, kern_a, f, tag=("A", id(phi)))
    t2 = 2.0 * pi.abs_bilinear(d_eta, f, kern_star, f, tag=("star", id(phi)))
    t3 = t4 = 0.0
    zero = MultiIndex.zero(f.n)
    for nu in eta.below(strict=True):
        if nu == zero:
            continue
        c = eta.binom(nu)
        F, G = differentiate(f, nu), differentiate(f, eta - nu)
        t3 += 0.5 * c * pi.abs_bilinear(F, G, kern_a, f, tag=("A", id(phi)))
        t4 += c * pi.abs_bilinear(F, G, kern_star, f, tag=("star", id(phi)))
    return lhs, {"T1": t1, "T2": t2, "T3": t3, "T4": t4}


def signed_bound_check(f, eta, phi, k, quad=DEFAULT_QUAD, case_id="", tolerance=1e-10):
    """LHS int d^eta Q(f,f) sgn(d^eta f) phi against the four-term bound.

    Both sides are computed at ``quad`` and at ``quad.coarser()``; the spread is the
    error estimate. A negative margin is returned as data, never raised.
    """
    eta = as_multi_index(eta, f.n)
    lhs, terms = _signed_bound_once(f, eta, phi, k, quad)
    lhs_c, terms_c = _signed_bound_once(f, eta, phi, k, quad.coarser())
    rhs, rhs_c = sum(terms.values()), sum(terms_c.values())
    err = abs(lhs - lhs_c) + abs(rhs - rhs_c)
    params = {"eta": eta.label(), "phi": phi.name, "alpha": k.alpha,
              "h": k.cross_section.name, "n": k.n}
    return WeakFormReport(lhs, rhs, err, case_id, params, terms, tolerance)


# ---------------------------------------------------------------------------
# pointwise gain and loss
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GainQuadrature:
    radial_order: int = 8
    radial_panels: int = 16    # panels across the bulk |u| in [|xi| - R0, |xi| + R0]
    polar_order: int = 8
    azimuth: int = 16          # u azimuth, only used for anisotropic inputs
    sigma_order: int = 8
    sigma_azimuth: int = 12
    max_levels: int = 8        # cap on geometric grading toward the collinear directions

    def levels_for(self, rho):
        """Grading depth: the angular caps that matter shrink like 1/|xi|."""
        if rho <= 2.0:
            return 0
        return min(self.max_levels, int(math.ceil(math.log(rho / 2.0) / math.log(4.0))) + 1)


DEFAULT_GAIN_QUAD = GainQuadrature()
DEFAULT_LOSS_QUAD = GainQuadrature(radial_panels=48, polar_order=12)


def _envelope_radius(*ds, digits=40.0):
    rc = max(d.max_center for d in ds)
    tm = max(d.max_width for d in ds)
    return rc + math.sqrt(2.0 * tm * digits) + 1.0


def gain_pointwise(g, weight, xi, k, tilt=0.0, quad=DEFAULT_GAIN_QUAD):
    """Q+(g, weight)(xi) * exp(tilt |xi|^2) = int int g(xi') weight(xi'*) B dsigma dxi*.

    The tilt lets ratios Q+/M_r be formed without underflow: it is split between
    the two post-collision factors using |xi'|^2 + |xi'*|^2 = |xi|^2 + |xi*|^2.
    ``g`` and ``weight`` may also be sequences of densities; Q+ is bilinear, so one
    pass over the nodes then returns the array of shape (len(g), len(weight)).
    """
    single = isinstance(g, PolyGaussianDensity) and isinstance(weight, PolyGaussianDensity)
    gs = [g] if isinstance(g, PolyGaussianDensity) else list(g)
    ws = [weight] if isinstance(weight, PolyGaussianDensity) else list(weight)
    xi = np.asarray(xi, dtype=float)
    n = k.n
    cs = k.cross_section
    iso = all(d.is_isotropic() for d in gs + ws)
    R = float(np.linalg.norm(xi)) + _envelope_radius(*gs, *ws)
    rr, wr, dirs, wd = _u_polar_nodes(xi, R, quad, iso, n)
    u = (rr[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    wu = (wr[:, None] * rr[:, None] ** (n - 1 + k.alpha) * wd[None, :]).ravel()
    lv = quad.levels_for(float(np.linalg.norm(xi)))
    if lv:
        z, wz = build_graded_jacobi_rule(cs.folded_exponent, order=quad.sigma_order, levels=lv)
    else:
        jr = build_jacobi_rule(2 * quad.sigma_order, cs.folded_exponent, cs.folded_exponent)
        z, wz = jr.nodes, jr.weights
    rule = _graded_sigma_rule(n, z, wz, quad.sigma_azimuth, cs.folded_exponent)
    sw = rule.weights * cs.smooth(rule.z)
    total = np.zeros((len(gs), len(ws)))
    step = max(1, _CHUNK // (len(sw) * max(len(gs), len(ws))))
    for s in range(0, len(u), step):
        uu = u[s:s + step]
        b = xi[None, :] - uu
        uhat, r = _unit(uu)
        V = xi[None, :] - 0.5 * uu
        sig = sigma_directions(uhat, rule)
        half = 0.5 * r[:, None, None] * sig
        xp = V[:, None, :] + half
        xps = V[:, None, :] - half
        sp = tilt * np.sum(xp * xp, axis=-1)
        sps = tilt * (np.sum(xps * xps, axis=-1) - np.sum(b * b, axis=-1)[:, None])
        gv = np.stack([d.evaluate(xp, log_shift=sp) for d in gs]) * sw
        wv = np.stack([d.evaluate(xps, log_shift=sps) for d in ws]) * wu[s:s + step, None]
        total += np.einsum("ink,jnk->ij", gv, wv)
    return float(total[0, 0]) if single else total


def _graded_sigma_rule(n, z, wz, azimuth, exponent):
    from .quadrature import SigmaRule
    if n == 2:
        return SigmaRule(2, np.concatenate([z, z]),
                         np.concatenate([np.ones_like(z), -np.ones_like(z)]),
                         np.zeros(2 * len(z)), np.concatenate([wz, wz]), exponent)
    ps = 2.0 * math.pi * np.arange(azimuth) / azimuth
    return SigmaRule(3, np.repeat(z, azimuth), np.tile(np.cos(ps), len(z)),
                     np.tile(np.sin(ps), len(z)),
                     np.repeat(wz, azimuth) * (2.0 * math.pi / azimuth), exponent)


def _u_polar_nodes(xi, R, q, isotropic, n):
    """Nodes for u = xi - xi* in polar coordinates, polar axis xi_hat, radius up to R."""
    rho0 = float(np.linalg.norm(xi))
    ehat, _ = _unit(np.asarray(xi, dtype=float)[None, :])
    ehat = ehat[0]
    r0 = max(R - rho0, 1.0)
    lo = max(rho0 - r0, 0.0)
    br = np.linspace(lo, R, q.radial_panels + 1)
    if lo > 0.0:
        br = np.union1d(np.linspace(0.0, lo, 5), br)
    rr, wr = composite_gauss_legendre(br, q.radial_order)
    levels = q.levels_for(rho0)
    if n == 3:
        cb = graded_breaks(-1.0, 1.0, 1.0, levels) if levels else np.linspace(-1.0, 1.0, 9)
        ct, wt = composite_gauss_legendre(cb, q.polar_order)
        st = np.sqrt(np.clip(1.0 - ct * ct, 0.0, None))
        e1 = np.cross(ehat, np.eye(3)[np.argmin(np.abs(ehat))])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(ehat, e1)
        if isotropic:
            dirs = ct[:, None] * ehat + st[:, None] * e1
            wd = wt * 2.0 * math.pi
        else:
            ps = 2.0 * math.pi * np.arange(q.azimuth) / q.azimuth
            dirs = (ct[:, None, None] * ehat + st[:, None, None]
                    * (np.cos(ps)[None, :, None] * e1 + np.sin(ps)[None, :, None] * e2)).reshape(-1, 3)
            wd = np.repeat(wt, q.azimuth) * (2.0 * math.pi / q.azimuth)
    else:
        half = graded_breaks(0.0, math.pi, 0.0, levels) if levels else np.linspace(0.0, math.pi, 9)
        tb = np.concatenate([-half[::-1][:-1], half])
        th, wd = composite_gauss_legendre(tb, q.polar_order)
        e1 = np.array([-ehat[1], ehat[0]])
        dirs = np.cos(th)[:, None] * ehat + np.sin(th)[:, None] * e1
    return rr, wr, dirs, wd


def loss_L(g, xi, alpha, quad=DEFAULT_LOSS_QUAD):
    """L(g)(xi) = int g(xi*) |xi - xi*|^alpha dxi*, in polar coordinates about xi."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    xi = np.asarray(xi, dtype=float)
    R = float(np.linalg.norm(xi)) + _envelope_radius(g)
    rr, wr, dirs, wd = _u_polar_nodes(xi, R, quad, g.is_isotropic(), g.n)
    pts = xi[None, None, :] - rr[:, None, None] * dirs[None, :, :]
    prof = g(pts) @ wd
    return float(np.sum(wr * rr ** (g.n - 1 + alpha) * prof))


def loss_lower_constant(g, alpha, radii=None, directions=None, form="max", floor=1e-12,
                        quad=DEFAULT_LOSS_QUAD):
    """Empirical k_alpha: inf of L(g)(xi) / max(|xi|^alpha, floor) on a grid, capped by the
    asymptotic limit m_0 (the mass). ``form="bracket"`` divides by (1+|xi|^2)^(alpha/2)."""
    m0 = g.mass()
    if not m0 > 0.0:
        raise ValueError("loss_lower_constant needs a density with positive mass")
    radii = np.concatenate([[0.0], np.geomspace(0.05, 60.0, 40)]) if radii is None else radii
    if directions is None:
        if g.is_isotropic():
            directions = np.eye(g.n)[:1]
        else:
            directions, _ = build_sphere_rule(g.n, 4)
    best = math.inf
    for e in directions:
        for rho in radii:
            L = loss_L(g, rho * np.asarray(e), alpha, quad)
            den = max(rho ** alpha, floor) if form == "max" else (1.0 + rho * rho) ** (alpha / 2.0)
            best = min(best, L / den)
    return min(best, m0) if form == "max" else best


# ---------------------------------------------------------------------------
# gain ratio checks
# ---------------------------------------------------------------------------


def weighted_l1(g, r, s=0.0, points=4000):
    """int |g| exp(r |xi|^2) (1 + |xi|^2)^(-s) for isotropic g (radial quadrature)."""
    from .quadrature import sphere_area
    if not g.is_isotropic():
        raise ValueError("weighted_l1 expects an isotropic density")
    rate = min(1.0 / (2.0 * t.width) for t in g.terms)
    if rate <= r:
        return math.inf
    R = math.sqrt(80.0 / (rate - r)) + 1.0
    rr, w = composite_gauss_legendre(np.linspace(0.0, R, 65), 10)
    e = np.zeros((len(rr), g.n))
    e[:, 0] = rr
    vals = np.abs(g.evaluate(e, log_shift=r * rr * rr)) * (1.0 + rr * rr) ** (-s)
    return float(sphere_area(g.n - 1) * np.sum(w * rr ** (g.n - 1) * vals))


@dataclass
class GainRatioReport:
    r: float
    s: float
    radii: list
    ratios: list          # per density, ratio curve over radii
    l1_norms: list
    k_emp: float
    tail_nonincreasing: list

    def to_dict(self):
        return asdict(self)


def _bracket_weight(n, r, s):
    """(1 + |xi|^2)^s M_r as a density (integer s)."""
    poly = {}
    for combo in itertools.product(range(int(s) + 1), repeat=n):
        if sum(combo) <= s:
            c = math.factorial(int(s)) / (math.factorial(int(s) - sum(combo))
                                          * math.prod(math.factorial(j) for j in combo))
            poly[tuple(2 * j for j in combo)] = float(c)
    return PolyGaussianDensity.single(n, poly, temperature=1.0 / (2.0 * r))


def gain_ratio_check(gs, r, k, s_values=(0,), radii=None, tail_from=10.0,
                     quad=DEFAULT_GAIN_QUAD, rel_slack=1e-3):
    """sup_xi Q+(g, W)/W against ||g/W||_1 with W = (1+|xi|^2)^s M_r, for a family of g.

    Returns one report per s. The tail flag allows a relative rise of ``rel_slack``
    between neighbouring radii, the size of the quadrature error at large |xi|.
    """
    n = k.n
    radii = list(np.linspace(0.0, 20.0, 11)) if radii is None else list(radii)
    Ws = [_bracket_weight(n, r, s) for s in s_values]
    curves = np.empty((len(gs), len(Ws), len(radii)))
    for j, rho in enumerate(radii):
        xi = np.zeros(n)
        xi[0] = rho
        vals = gain_pointwise(gs, Ws, xi, k, tilt=r, quad=quad)
        for si, s in enumerate(s_values):
            curves[:, si, j] = vals[:, si] / (1.0 + rho * rho) ** s
    reports = []
    for si, s in enumerate(s_values):
        ratios = [list(map(float, curves[i, si])) for i in range(len(gs))]
        norms = [weighted_l1(g, r, s) for g in gs]
        flags = []
        for c in ratios:
            tail = [v for rho, v in zip(radii, c) if rho >= tail_from]
            flags.append(bool(all(b2 <= a2 * (1.0 + rel_slack) for a2, b2 in zip(tail, tail[1:]))))
        k_emp = max(max(c) / nm for c, nm in zip(ratios, norms))
        reports.append(GainRatioReport(float(r), float(s), [float(x) for x in radii], ratios,
                                       norms, float(k_emp), flags))
    return reports


def gaussian_family(n, r, count=10, seed=0):
    """Centred isotropic Gaussians with rates strictly above r (so g / M_r is integrable)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        rate = r * (1.2 + 2.0 * rng.random())
        mass = 0.5 + rng.random()
        out.append(PolyGaussianDensity.maxwellian(n, 1.0 / (2.0 * rate), mass=mass))
    return out
