"""Collision kernels B(u, sigma) = |u|^alpha h(u_hat . sigma) and elastic kinematics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import DEFAULT_LINE_ORDER, build_jacobi_rule, sphere_area

CATALOG_MU = (0.0, 0.25, 0.5, 1.0)


@dataclass(frozen=True)
class AngularCrossSection:
    """Normalised angular cross section h on (-1, 1).

    ``smooth`` is h(z) (1 - z^2)^(mu/2), the bounded remainder left after folding the
    singular factor into Jacobi weights.
    """

    h: Callable
    smooth: Callable
    mu: float
    c_bound: float
    n: int
    mass: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def epsilon(self):
        return self.n - 1 - self.mu

    @property
    def folded_exponent(self):
        """Jacobi exponent a = b = (n-3)/2 - mu/2 carrying both sphere and singular factors."""
        return (self.n - 3) / 2.0 - self.mu / 2.0

    @property
    def bounded(self):
        return self.mu == 0.0

    def __call__(self, z):
        return self.h(z)

    def h_bar(self, z):
        z = np.asarray(z, dtype=float)
        return 0.5 * (self.h(z) + self.h(-z))

    def smooth_bar(self, z):
        z = np.asarray(z, dtype=float)
        return 0.5 * (self.smooth(z) + self.smooth(-z))

    def sup_norm(self, points=10_000):
        z = np.linspace(-1.0, 1.0, points + 2)[1:-1]
        return float(np.max(self.h(z)))


@dataclass(frozen=True)
class CollisionKernel:
    alpha: float
    cross_section: AngularCrossSection

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def n(self):
        return self.cross_section.n


def _raw_mass(smooth, n, mu, order):
    a = (n - 3) / 2.0 - mu / 2.0
    rule = build_jacobi_rule(order, a, a)
    return sphere_area(n - 2) * rule.integrate(smooth)


def normalize_cross_section(h_raw, mu=0.0, n=3, order=DEFAULT_LINE_ORDER, name="custom",
                            params=None, grid_points=10_000, smooth_raw=None):
    """Scale ``h_raw`` so that omega_{n-2} int h(z) (1-z^2)^((n-3)/2) dz = 1.

    ``smooth_raw`` may supply h_raw(z) (1-z^2)^(mu/2) in closed form, which keeps it
    finite at z = +/-1 where the product form is 0 * inf.
    """
    if n not in (2, 3):
        raise ValueError(f"unsupported dimension n={n}")
    if not mu < n - 1:
        raise ValueError(f"mu={mu} violates the cutoff condition mu < n-1={n - 1}")

    if smooth_raw is None:
        def smooth_raw(z):
            z = np.asarray(z, dtype=float)
            return np.asarray(h_raw(z), dtype=float) * (1.0 - z * z) ** (mu / 2.0)

    mass = _raw_mass(smooth_raw, n, mu, order)
    if not math.isfinite(mass) or mass <= 0.0:
        raise ValueError(f"cross section has non-positive or non-finite mass ({mass})")

    def h(z, _m=mass):
        return np.asarray(h_raw(np.asarray(z, dtype=float)), dtype=float) / _m

    def smooth(z, _m=mass):
        return smooth_raw(z) / _m

    zg = np.linspace(-1.0, 1.0, grid_points + 2)[1:-1]
    c_bound = float(np.max(smooth(zg)))
    return AngularCrossSection(h=h, smooth=smooth, mu=float(mu), c_bound=c_bound, n=n,
                               mass=_raw_mass(smooth, n, mu, order), name=name,
                               params=dict(params or {}))


def _polynomial(coeffs):
    c = np.asarray(coeffs, dtype=float)

    def h(z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=float), c)
    return h


def catalog_cross_section(name, n=3, **params):
    """Built-in cross sections.

    ``hard_sphere``: constant; ``singular``: (1 - z^2)^(-mu/2) with parameter ``mu``;
    ``polynomial``: sum_k coeffs[k] z^k (bounded).
    """
    if name == "hard_sphere":
        return normalize_cross_section(lambda z: np.ones_like(np.asarray(z, dtype=float)),
                                       0.0, n, name=name)
    if name == "singular":
        mu = float(params.get("mu", 0.5))

        def h(z, _mu=mu):
            z = np.asarray(z, dtype=float)
            return (1.0 - z * z) ** (-_mu / 2.0)
        return normalize_cross_section(h, mu, n, name=name, params={"mu": mu},
                                       smooth_raw=lambda z: np.ones_like(np.asarray(z, dtype=float)))
    if name == "polynomial":
        coeffs = params.get("coeffs")
        if not coeffs:
            raise ValueError("polynomial cross section needs a non-empty 'coeffs' list")
        return normalize_cross_section(_polynomial(coeffs), 0.0, n, name=name,
                                       params={"coeffs": list(coeffs)})
    raise ValueError(f"unknown cross section {name!r}")


def audit_cross_section(cs, points=10_000, order=DEFAULT_LINE_ORDER):
    """Grid checks of the admissibility conditions; returns a dict of booleans."""
    z = np.linspace(-1.0, 1.0, points + 2)[1:-1]
    hz = cs.h(z)
    zp = np.linspace(0.0, 1.0, points + 2)[1:-1]
    sym = cs.h(zp) + cs.h(-zp)
    env = cs.smooth(z)
    return {
        "nonnegative": bool(np.all(hz >= 0.0)),
        "symmetrised_nondecreasing": bool(np.all(np.diff(sym) >= -1e-12 * np.max(np.abs(sym)))),
        "envelope": bool(np.all(env >= 0.0) and np.all(env <= cs.c_bound * (1 + 1e-12))),
        "cutoff": bool(cs.mu < cs.n - 1),
        "normalized": bool(abs(_raw_mass(cs.smooth, cs.n, cs.mu, order) - 1.0) <= 1e-10),
    }


def post_collision(xi, xi_star, sigma, atol=1e-12):
    """Elastic post-collision velocities xi' = xi + (|u| sigma - u)/2, xi*' = xi* - (...)."""
    xi = np.asarray(xi, dtype=float)
    xi_star = np.asarray(xi_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(np.abs(np.linalg.norm(sigma, axis=-1) - 1.0) > atol):
        raise ValueError("sigma must be a unit vector")
    u = xi - xi_star
    du = 0.5 * (np.linalg.norm(u, axis=-1, keepdims=True) * sigma - u)
    return xi + du, xi_star - du


def kernel_eval(k, xi, xi_star, sigma):
    """B(xi - xi*, sigma); zero where the velocities coincide."""
    u = np.asarray(xi, dtype=float) - np.asarray(xi_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    r = np.linalg.norm(u, axis=-1)
    safe = np.where(r > 0.0, r, 1.0)
    z = np.clip(np.sum(u * sigma, axis=-1) / safe, -1.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        hz = k.cross_section.h(z)
    out = np.where(r > 0.0, r ** k.alpha * np.where(r > 0.0, hz, 0.0), 0.0)
    return out if out.ndim else float(out)
