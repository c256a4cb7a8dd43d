"""Deterministic quadrature: Gauss-Jacobi line rules, Gauss-Hermite velocity rules,
graded composite rules, sphere rules and an adaptive Gauss-Kronrod oracle.

All rules are immutable once built and can be shared freely between threads.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import betaln, roots_genlaguerre, roots_hermite, roots_legendre

DEFAULT_LINE_ORDER = 64
DEFAULT_VELOCITY_DEGREE = 30
DEFAULT_TOL = 1e-10


class IntegrationError(RuntimeError):
    """Adaptive integration exhausted its budget; ``estimate`` and ``error`` hold the
    partial result."""

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def sphere_area(k):
    """Surface measure of the unit sphere S^k embedded in R^(k+1)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


# ---------------------------------------------------------------------------
# line rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LineRule:
    """Gauss-Jacobi rule for the weight (1-z)^a (1+z)^b on (-1, 1).

    ``prob`` are the weights normalised to sum to one and ``log_mass`` is the log of
    the total weight mass, so rules with huge exponents stay representable.
    """

    nodes: np.ndarray
    prob: np.ndarray
    log_mass: float
    exponent_a: float
    exponent_b: float

    @property
    def order(self):
        return len(self.nodes)

    @property
    def degree(self):
        return 2 * len(self.nodes) - 1

    @property
    def weights(self):
        return math.exp(self.log_mass) * self.prob

    def integrate(self, fn):
        """Integral of fn(z) (1-z)^a (1+z)^b over (-1, 1)."""
        vals = np.asarray(fn(self.nodes), dtype=float)
        return math.exp(self.log_mass) * float(np.dot(self.prob, vals))

    def mean(self, fn):
        """Weighted average of fn; the integral divided by the weight mass."""
        return float(np.dot(self.prob, np.asarray(fn(self.nodes), dtype=float)))


def _jacobi_recurrence(order, a, b):
    k = np.arange(order, dtype=float)
    s = 2.0 * k + a + b
    diag = np.empty(order)
    diag[0] = (b - a) / (a + b + 2.0)
    if order > 1:
        diag[1:] = (b * b - a * a) / (s[1:] * (s[1:] + 2.0))
    off = np.empty(max(order - 1, 0))
    if order > 1:
        off[0] = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b) ** 2 * (3.0 + a + b))
        kk = k[2:]
        ss = 2.0 * kk + a + b
        off[1:] = (4.0 * kk * (kk + a) * (kk + b) * (kk + a + b)
                   / (ss * ss * (ss + 1.0) * (ss - 1.0)))
    return diag, np.sqrt(off)


def _log_christoffel(x, diag, off):
    """log of 1 / sum_k p_k(x)^2 for the orthonormal polynomials of the recurrence (p_0 = 1)."""
    x = np.asarray(x, dtype=float)
    p_prev = np.zeros_like(x)
    p_cur = np.ones_like(x)
    log_scale = np.zeros_like(x)
    acc = np.ones_like(x)
    for k in range(len(diag) - 1):
        b_prev = off[k - 1] if k > 0 else 0.0
        p_next = ((x - diag[k]) * p_cur - b_prev * p_prev) / off[k]
        p_prev, p_cur = p_cur, p_next
        acc += p_cur ** 2
        big = np.maximum(np.abs(p_cur), np.abs(p_prev)) > 1e100
        if np.any(big):
            f = np.where(big, 1e-100, 1.0)
            p_prev, p_cur, acc = p_prev * f, p_cur * f, acc * f * f
            log_scale += np.where(big, 2 * 100 * math.log(10.0), 0.0)
    return -(np.log(acc) + log_scale)


def build_jacobi_rule(order, a=0.0, b=0.0):
    """Gauss-Jacobi rule with ``order`` nodes via Golub-Welsch.

    Exact for polynomials of degree <= 2*order - 1 against (1-z)^a (1+z)^b.
    """
    order = int(order)
    if order < 1:
        raise ValueError("order must be >= 1")
    if not (a > -1.0 and b > -1.0):
        raise ValueError(f"Jacobi exponents must exceed -1 (got a={a}, b={b})")
    log_mass = (a + b + 1.0) * math.log(2.0) + float(betaln(a + 1.0, b + 1.0))
    if order == 1:
        node = (b - a) / (a + b + 2.0)
        return LineRule(np.array([node]), np.array([1.0]), log_mass, a, b)
    diag, off = _jacobi_recurrence(order, a, b)
    nodes, vecs = eigh_tridiagonal(diag, off)
    prob = vecs[0, :] ** 2
    prob /= prob.sum()
    tiny = prob < 1e-250
    if np.any(tiny):
        # eigenvector entries underflow at extreme nodes; use the Christoffel function
        log_c = _log_christoffel(nodes[tiny], diag, off)
        log_ref = _log_christoffel(nodes[~tiny], diag, off)
        shift = float(np.max(log_ref)) - math.log(float(np.max(prob[~tiny])))
        prob[tiny] = np.exp(log_c - shift)
        prob /= prob.sum()
    nodes = np.clip(nodes, -1.0 + 1e-300, 1.0 - 1e-300)
    return LineRule(nodes, prob, log_mass, a, b)


def composite_gauss_legendre(breaks, order):
    """Composite Gauss-Legendre nodes/weights on consecutive intervals in ``breaks``."""
    t, w = roots_legendre(order)
    breaks = np.asarray(breaks, dtype=float)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + hi) * 0.5 + half * t[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def graded_breaks(x0, x1, focus, levels=8, ratio=0.25):
    """Breakpoints on [x0, x1] refined geometrically toward ``focus``."""
    pts = {float(x0), float(x1)}
    if x0 <= focus <= x1:
        pts.add(float(focus))
        for side, span in ((-1.0, focus - x0), (1.0, x1 - focus)):
            if span <= 0:
                continue
            d = span
            for _ in range(levels):
                d *= ratio
                pts.add(focus + side * d)
    return np.array(sorted(pts))


def build_graded_jacobi_rule(a, order=12, levels=10, ratio=0.25):
    """Composite rule on (-1, 1) for the weight (1-z^2)^a, geometrically graded
    toward both endpoints.

    Returns (nodes, weights) with the weight already folded in. Endpoint panels use
    one-sided Gauss-Jacobi, interior panels Gauss-Legendre.
    """
    d = [0.5 * ratio ** k for k in range(levels + 1)]
    left = [-1.0 + x for x in reversed(d)]
    breaks = np.unique(np.concatenate([[-1.0], left, [0.0], -np.array(left), [1.0]]))
    inner = breaks[1:-1]
    nodes, weights = composite_gauss_legendre(inner, order)
    weights = weights * (1.0 - nodes ** 2) ** a
    dl = breaks[1] + 1.0
    end = build_jacobi_rule(order, 0.0, a) if a != 0.0 else build_jacobi_rule(order)
    t, wt = end.nodes, end.weights
    zl = -1.0 + dl * (t + 1.0) / 2.0
    wl = (dl / 2.0) ** (a + 1.0) * wt * (1.0 - zl) ** a
    zr = -zl[::-1]
    wr = wl[::-1]
    return np.concatenate([zl, nodes, zr]), np.concatenate([wl, weights, wr])


# ---------------------------------------------------------------------------
# velocity-space rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VelocityRule:
    """Tensor Gauss-Hermite rule in R^n.

    ``gauss_weights`` integrate p(xi) exp(-|xi - center|^2 / scale^2); ``weights``
    integrate plain functions that decay like that Gaussian.
    """

    n: int
    nodes: np.ndarray
    gauss_weights: np.ndarray
    weights: np.ndarray
    scale: float
    degree: int

    def integrate(self, fn):
        return float(np.dot(self.weights, np.asarray(fn(self.nodes), dtype=float)))

    def integrate_weighted(self, fn):
        return float(np.dot(self.gauss_weights, np.asarray(fn(self.nodes), dtype=float)))


def _check_dim(n):
    if n not in (2, 3):
        raise ValueError(f"unsupported dimension n={n}; only 2 and 3 are supported")


def build_velocity_rule(n, order=DEFAULT_VELOCITY_DEGREE, scale=1.0, center=None):
    """Gauss-Hermite tensor rule exact for polynomials of total degree <= ``order``
    against exp(-|xi - center|^2 / scale^2)."""
    _check_dim(n)
    if order < 1:
        raise ValueError("order must be >= 1")
    m = order // 2 + 1
    t, w = roots_hermite(m)
    grids = np.meshgrid(*([t] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrid = np.meshgrid(*([w] * n), indexing="ij")
    wt = np.prod(np.stack([g.ravel() for g in wgrid], axis=-1), axis=-1)
    gauss_w = wt * scale ** n
    plain_w = gauss_w * np.exp(np.sum(pts ** 2, axis=-1))
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return VelocityRule(n, c + scale * pts, gauss_w, plain_w, float(scale), 2 * m - 1)


def build_sphere_rule(n, order=16):
    """Global-frame product rule on S^(n-1): Gauss-Legendre in the polar cosine times
    a trapezoid in azimuth (n=3), or a trapezoid in angle (n=2)."""
    _check_dim(n)
    naz = 2 * order
    phi = 2.0 * math.pi * (np.arange(naz) + 0.5) / naz
    if n == 2:
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return dirs, np.full(naz, 2.0 * math.pi / naz)
    c, wc = roots_legendre(order)
    s = np.sqrt(1.0 - c ** 2)
    dirs = np.stack([
        (s[:, None] * np.cos(phi)[None, :]).ravel(),
        (s[:, None] * np.sin(phi)[None, :]).ravel(),
        np.repeat(c, naz),
    ], axis=-1)
    weights = np.repeat(wc, naz) * (2.0 * math.pi / naz)
    return dirs, weights


@dataclass(frozen=True)
class SigmaRule:
    """Rule for sigma on S^(n-1) in the frame aligned with a unit vector u_hat.

    sigma = z u_hat + sqrt(1-z^2) omega, omega on the sphere orthogonal to u_hat.
    ``weights`` carry the folded weight (1-z^2)^exponent and the azimuthal measure:
    sum_k w_k F(sigma_k) approximates int F(sigma) (1 - (u_hat.sigma)^2)^(exponent - (n-3)/2) dsigma.
    """

    n: int
    z: np.ndarray
    cos_az: np.ndarray
    sin_az: np.ndarray
    weights: np.ndarray
    exponent: float


def build_sigma_rule(n, exponent, order=DEFAULT_LINE_ORDER, azimuth=32, graded=False,
                     levels=10):
    """Product rule over (z, azimuth) for sigma integrals with folded weight
    (1 - z^2)^exponent."""
    _check_dim(n)
    if graded:
        z, wz = build_graded_jacobi_rule(exponent, order=order, levels=levels)
    else:
        rule = build_jacobi_rule(order, exponent, exponent)
        z, wz = rule.nodes, rule.weights
    if n == 2:
        zz = np.concatenate([z, z])
        ca = np.concatenate([np.ones_like(z), -np.ones_like(z)])
        return SigmaRule(2, zz, ca, np.zeros_like(zz), np.concatenate([wz, wz]), exponent)
    psi = 2.0 * math.pi * np.arange(azimuth) / azimuth
    zz = np.repeat(z, azimuth)
    ca = np.tile(np.cos(psi), len(z))
    sa = np.tile(np.sin(psi), len(z))
    w = np.repeat(wz, azimuth) * (2.0 * math.pi / azimuth)
    return SigmaRule(3, zz, ca, sa, w, exponent)


def orthonormal_frame(uhat):
    """Unit vectors completing ``uhat`` (shape (..., n)) to an orthonormal frame.

    Returns a list of n-1 arrays with the same shape as ``uhat``.
    """
    uhat = np.asarray(uhat, dtype=float)
    n = uhat.shape[-1]
    if n == 2:
        return [np.stack([-uhat[..., 1], uhat[..., 0]], axis=-1)]
    helper = np.zeros_like(uhat)
    use_x = np.abs(uhat[..., 0]) < 0.9
    helper[..., 0] = np.where(use_x, 1.0, 0.0)
    helper[..., 1] = np.where(use_x, 0.0, 1.0)
    e1 = np.cross(uhat, helper)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(uhat, e1)
    return [e1, e2]


def sigma_directions(uhat, rule):
    """sigma vectors of shape (..., K, n) for a batch of unit vectors ``uhat``."""
    uhat = np.asarray(uhat, dtype=float)
    frame = orthonormal_frame(uhat)
    z = rule.z
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    sig = uhat[..., None, :] * z[:, None]
    sig = sig + frame[0][..., None, :] * (s * rule.cos_az)[:, None]
    if rule.n == 3:
        sig = sig + frame[1][..., None, :] * (s * rule.sin_az)[:, None]
    return sig


# ---------------------------------------------------------------------------
# pair rule for (xi, xi_star) integrals with the |u|^alpha factor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairRule:
    """Nodes (xi, xi_star) and weights for  int int F(xi, xi*) |xi - xi*|^alpha.

    Built in centre-of-mass variables V = (xi + xi*)/2 and u = xi - xi*; the
    |u|^alpha factor is absorbed into a generalised Gauss-Laguerre radial rule.
    """

    xi: np.ndarray
    xi_star: np.ndarray
    weights: np.ndarray
    alpha: float

    def __len__(self):
        return len(self.weights)


def build_pair_rule(n, alpha, temperature=1.0, v_order=8, r_order=10, ang_order=6,
                    center=None):
    """Pair rule adapted to a product of Gaussians of the given temperature.

    For f(xi) g(xi*) ~ exp(-(|xi|^2 + |xi*|^2) / 2T) the centre of mass has width
    sqrt(T) and the relative velocity width 2 sqrt(T).
    """
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return build_block_pair_rule(n, alpha, temperature, temperature, c, c,
                                 v_order=v_order, r_order=r_order, ang_order=ang_order)


def build_block_pair_rule(n, alpha, t_i, t_j, m_i, m_j, v_order=8, r_order=10, ang_order=6):
    """Pair rule for F(xi) G(xi*) with F ~ N(m_i, t_i) and G ~ N(m_j, t_j).

    The relative velocity u carries the radial weight |u|^(n-1+alpha) through a
    generalised Laguerre rule scaled to the variance t_i + t_j of u. For each u node
    the centre-of-mass nodes are a Hermite rule centred on the conditional mean of V,
    so polynomial x Gaussian integrands in V are integrated exactly.
    """
    _check_dim(n)
    m_i = np.asarray(m_i, dtype=float)
    m_j = np.asarray(m_j, dtype=float)
    tau = t_i * t_j / (t_i + t_j)
    su = math.sqrt(2.0 * (t_i + t_j))
    vrule = build_velocity_rule(n, 2 * v_order - 1, scale=math.sqrt(2.0 * tau))
    a_lag = (n + alpha) / 2.0 - 1.0
    x, wx = roots_genlaguerre(r_order, a_lag)
    r = su * np.sqrt(x)
    wr = 0.5 * su ** (n + alpha) * wx * np.exp(x)
    dirs, wd = build_sphere_rule(n, ang_order)
    u = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    wu = (wr[:, None] * wd[None, :]).ravel()
    cv = tau * ((m_i[None, :] - 0.5 * u) / t_i + (m_j[None, :] + 0.5 * u) / t_j)
    V = cv[:, None, :] + vrule.nodes[None, :, :]
    xi = (V + 0.5 * u[:, None, :]).reshape(-1, n)
    xs = (V - 0.5 * u[:, None, :]).reshape(-1, n)
    w = (wu[:, None] * vrule.weights[None, :]).ravel()
    return PairRule(xi, xs, w, float(alpha))


# ---------------------------------------------------------------------------
# adaptive oracle
# ---------------------------------------------------------------------------

_GK_X = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_GK_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_GK_WG = np.array([0.129484966168869693270611432679082,
                   0.279705391489276667901467771423780,
                   0.381830050505118944950369775488975,
                   0.417959183673469387755102040816327])
_GK_NODES = np.concatenate([-_GK_X[:-1], _GK_X[::-1]])
_GK_WEIGHTS = np.concatenate([_GK_WK[:-1], _GK_WK[::-1]])
_G_WEIGHTS = np.zeros(15)
_G_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_GK_WG[:-1], _GK_WG[::-1]])


@dataclass
class AdaptiveResult:
    value: float
    error: float
    intervals: int = field(default=0)


def _gk15(fn, a, b):
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    x = c + h * _GK_NODES
    y = np.asarray(fn(x), dtype=float)
    if y.shape != x.shape:
        y = np.array([float(fn(t)) for t in x])
    k = h * float(np.dot(_GK_WEIGHTS, y))
    g = h * float(np.dot(_G_WEIGHTS, y))
    return k, abs(k - g)


def adaptive_integrate(fn, a=0.0, b=1.0, tol=DEFAULT_TOL, rel_tol=0.0, max_intervals=5000):
    """Globally adaptive Gauss-Kronrod (7/15) integration by interval bisection.

    Independent of the fixed Gauss rules; used as the oracle for them. Raises
    IntegrationError with the partial estimate if the budget runs out.
    """
    if tol <= 0 and rel_tol <= 0:
        raise ValueError("tol must be positive")
    val, err = _gk15(fn, a, b)
    heap = [(-err, a, b, val, err)]
    total, total_err = val, err
    count = 1
    while total_err > max(tol, rel_tol * abs(total)):
        if count >= max_intervals:
            raise IntegrationError(
                f"adaptive_integrate: no convergence after {count} intervals "
                f"(estimate {total!r}, error {total_err:.3g})", total, total_err)
        _, lo, hi, v, e = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            raise IntegrationError("adaptive_integrate: interval underflow", total, total_err)
        v1, e1 = _gk15(fn, lo, mid)
        v2, e2 = _gk15(fn, mid, hi)
        total += v1 + v2 - v
        total_err += e1 + e2 - e
        heapq.heappush(heap, (-e1, lo, mid, v1, e1))
        heapq.heappush(heap, (-e2, mid, hi, v2, e2))
        count += 1
    # resum to shed accumulated rounding in the running totals
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(item[4] for item in heap)
    return AdaptiveResult(total, total_err, count)
