"""Command-line entry point: YAML config in, CSV/JSON artifacts out.

Every artifact carries the tool version and a hash of the effective configuration.
Violated inequalities are written as finding records and exit with status 0; malformed
configs exit with status 2 and a ``file:line: message`` diagnostic.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .collision import (CollisionQuadrature, TestFunction, gain_ratio_check, gaussian_family,
                        leibniz_check, loss_lower_constant, signed_bound_check, weak_gain,
                        weak_loss)
from .density import MultiIndex, PolyGaussianDensity, abs_moments, build_shell_rule
from .dsmc import init_from_density, mean_free_time, run as dsmc_run
from .hierarchy import HierarchyConfig, calibrate_k0, calibrate_k1, propagate_bounds
from .kernel import CollisionKernel, catalog_cross_section
from .moments import tail_rate_from_sequence
from .povzner import gamma_asymptotic_fit, gamma_table, povzner_check, povzner_one_body

SUBCOMMANDS = ("gamma", "povzner", "weakform", "hierarchy", "dsmc", "tails", "gainratio")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config loading with source lines
# ---------------------------------------------------------------------------


def _marks(node, path=(), out=None):
    """Map every key path of a composed YAML node to its 1-based source line."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _marks(v, path + (k.value,), out)
            out[path + (k.value,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _marks(v, path + (i,), out)
    return out


class Config:
    """Parsed config with line lookup for diagnostics."""

    def __init__(self, data, lines, source):
        self.data = data
        self.lines = lines
        self.source = source

    def error(self, path, message):
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p, 1)
        dotted = ".".join(str(x) for x in path) or "<root>"
        return ConfigError(f"{self.source}:{line}: {dotted}: {message}")

    def get(self, path, default=None, required=False):
        node = self.data
        for key in path:
            if isinstance(node, dict) and key in node:
                node = node[key]
            elif isinstance(node, list) and isinstance(key, int) and 0 <= key < len(node):
                node = node[key]
            else:
                if required:
                    raise self.error(path, "missing required key")
                return default
        return node

    def number(self, path, default=None, required=False, lo=None, hi=None, lo_open=False,
               hi_open=False):
        v = self.get(path, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(path, f"expected a number, got {v!r}")
        v = float(v)
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise self.error(path, f"value {v} below the allowed range")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise self.error(path, f"value {v} above the allowed range")
        return v

    def hash(self):
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canon.encode()).hexdigest()


def load_config(path):
    text = Path(path).read_text()
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        raise ConfigError(f"{path}:{line}: YAML syntax error: {getattr(exc, 'problem', exc)}")
    if data is None:
        data, node = {}, None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: <root>: top level must be a mapping")
    lines = _marks(node) if node is not None else {}
    return Config(data, lines, str(path))


# ---------------------------------------------------------------------------
# schema pieces
# ---------------------------------------------------------------------------


def parse_kernel(cfg):
    n = int(cfg.number(("kernel", "n"), 3))
    if n not in (2, 3):
        raise cfg.error(("kernel", "n"), "dimension must be 2 or 3")
    alpha = cfg.number(("kernel", "alpha"), 1.0, lo=0.0, hi=1.0, lo_open=True)
    name = cfg.get(("kernel", "cross_section"), "hard_sphere")
    params = cfg.get(("kernel", "params"), {}) or {}
    if not isinstance(params, dict):
        raise cfg.error(("kernel", "params"), "expected a mapping")
    try:
        cs = catalog_cross_section(name, n=n, **params)
    except (ValueError, TypeError) as exc:
        raise cfg.error(("kernel", "cross_section"), str(exc))
    return CollisionKernel(alpha, cs)


def parse_p_grid(cfg, default=None, lo=1.0):
    grid = cfg.get(("p_grid",), default)
    if grid is None:
        raise cfg.error(("p_grid",), "missing required key")
    if isinstance(grid, dict):
        start = cfg.number(("p_grid", "start"), required=True)
        stop = cfg.number(("p_grid", "stop"), required=True)
        step = cfg.number(("p_grid", "step"), 1.0, lo=0.0, lo_open=True)
        grid = list(np.round(np.arange(start, stop + 0.5 * step, step), 12))
    if not isinstance(grid, list) or not grid:
        raise cfg.error(("p_grid",), "p-grid must be a non-empty list or {start, stop, step}")
    out = []
    for i, p in enumerate(grid):
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise cfg.error(("p_grid", i), f"expected a number, got {p!r}")
        if p < lo:
            raise cfg.error(("p_grid", i), f"order {p} below {lo}")
        out.append(float(p))
    return out


def parse_b(cfg, kernel):
    eps = kernel.cross_section.epsilon
    b = cfg.number(("b",), eps / 4.0, lo=0.0, lo_open=True)
    if not b < eps / 2.0:
        raise cfg.error(("b",), f"b = {b} must be below eps/2 = {eps / 2.0}")
    return b


def _parse_component(cfg, path, n):
    kind = cfg.get(path + ("type",), "maxwellian")
    center = cfg.get(path + ("center",), None)
    if center is not None and (not isinstance(center, list) or len(center) != n):
        raise cfg.error(path + ("center",), f"center must be a list of {n} numbers")
    T = cfg.number(path + ("temperature",), 1.0, lo=0.0, lo_open=True)
    mass = cfg.number(path + ("mass",), 1.0, lo=0.0, lo_open=True)
    if kind == "maxwellian":
        return PolyGaussianDensity.maxwellian(n, T, mass, center)
    if kind == "polynomial":
        terms = cfg.get(path + ("terms",), required=True)
        if not isinstance(terms, dict) or not terms:
            raise cfg.error(path + ("terms",), "expected a mapping 'i:j:k' -> coefficient")
        poly = {}
        for key, val in terms.items():
            ex = MultiIndex.parse(key).orders
            if len(ex) != n:
                raise cfg.error(path + ("terms", key), f"exponent needs {n} entries")
            poly[ex] = float(val)
        d = PolyGaussianDensity.single(n, poly, T, 1.0, center)
        m = d.mass()
        if not m > 0:
            raise cfg.error(path + ("terms",), "polynomial component has non-positive mass")
        return d.scale(mass / m)
    raise cfg.error(path + ("type",), f"unknown density type {kind!r}")


def parse_density(cfg, n, required=True):
    if cfg.get(("density",)) is None:
        if required:
            raise cfg.error(("density",), "missing required key")
        return None
    if cfg.get(("density", "type")) == "mixture":
        comps = cfg.get(("density", "components"), required=True)
        if not isinstance(comps, list) or not comps:
            raise cfg.error(("density", "components"), "expected a non-empty list")
        d = None
        for i in range(len(comps)):
            c = _parse_component(cfg, ("density", "components", i), n)
            d = c if d is None else d + c
        return d
    return _parse_component(cfg, ("density",), n)


def parse_quad(cfg):
    block = cfg.get(("quadrature",), {}) or {}
    fields = CollisionQuadrature.__dataclass_fields__
    kw = {}
    for key, val in block.items():
        if key not in fields:
            raise cfg.error(("quadrature", key), f"unknown quadrature field (known: {sorted(fields)})")
        kw[key] = int(cfg.number(("quadrature", key), lo=1))
    return CollisionQuadrature(**kw)


def parse_phi(cfg, path):
    kind = cfg.get(path + ("kind",), "power")
    if kind == "power":
        return TestFunction.power(cfg.number(path + ("p",), 1.0, lo=0.0))
    if kind == "maxwellian":
        return TestFunction.maxwellian(cfg.number(path + ("r",), 0.5, lo=0.0, lo_open=True))
    if kind == "component":
        return TestFunction.component(int(cfg.number(path + ("axis",), 0, lo=0)))
    raise cfg.error(path + ("kind",), f"unknown test function kind {kind!r}")


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


class Artifacts:
    def __init__(self, out, cfg, subcommand, seed, threads):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.provenance = {"tool": "kinmoments", "version": __version__, "subcommand": subcommand,
                           "config_hash": cfg.hash(), "seed": seed, "threads": threads}

    def header(self, extra=None):
        prov = dict(self.provenance, **(extra or {}))
        return [f"{k}: {json.dumps(prov[k], sort_keys=True)}" for k in sorted(prov)]

    def csv(self, name, columns, rows, extra=None):
        buf = io.StringIO()
        for line in self.header(extra):
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        (self.out / name).write_text(buf.getvalue(), encoding="utf-8")

    def text(self, name, text):
        (self.out / name).write_text(text, encoding="utf-8")

    def json(self, name, obj, extra=None):
        doc = {"provenance": dict(self.provenance, **(extra or {})), "result": obj}
        (self.out / name).write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return ";".join(_fmt(v) for v in x)
    return str(x)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _kernel_info(k):
    return {"n": k.n, "alpha": k.alpha, "cross_section": k.cross_section.name,
            "params": k.cross_section.params, "epsilon": k.cross_section.epsilon}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gamma(cfg, art, seed):
    k = parse_kernel(cfg)
    ps = parse_p_grid(cfg)
    order = int(cfg.number(("gamma", "order"), 64, lo=2))
    tab = gamma_table(k.cross_section, ps, order)
    art.text("gamma.csv", tab.to_csv(art.header({"jacobi_order": order, **_kernel_info(k)})))
    findings = []
    if not tab.is_strictly_decreasing():
        findings.append({"kind": "gamma_not_decreasing"})
    result = {"kernel": _kernel_info(k), "strictly_decreasing": tab.is_strictly_decreasing(),
              "findings": findings}
    if cfg.get(("gamma", "asymptotic"), False):
        slope, r2 = gamma_asymptotic_fit(k.cross_section)
        target = -k.cross_section.epsilon / 2.0
        result["asymptotic"] = {"slope": slope, "r2": r2, "target": target,
                                "rel_error": abs(slope - target) / abs(target)}
    art.json("gamma.json", result, {"jacobi_order": order})


def cmd_povzner(cfg, art, seed):
    k = parse_kernel(cfg)
    ps = parse_p_grid(cfg)
    count = int(cfg.number(("povzner", "pairs"), 1000, lo=1))
    radius = cfg.number(("povzner", "radius"), 3.0, lo=0.0, lo_open=True)
    tol = cfg.number(("tolerance",), 1e-10, lo=0.0)
    quad = parse_quad(cfg)
    rng = np.random.default_rng(seed)
    rows, summary = [], []
    for p in ps:
        pairs = [(radius * rng.standard_normal(k.n) / math.sqrt(k.n),
                  radius * rng.standard_normal(k.n) / math.sqrt(k.n)) for _ in range(count)]
        reps = povzner_check(k.cross_section, p, pairs, quad, tol)
        counts = {"onesided": 0, "sym": 0, "none": 0}
        for i, rep in enumerate(reps):
            passing = rep.params["passing"]
            for c in passing:
                counts[c] += 1
            if not passing:
                counts["none"] += 1
            rows.append([p, i, rep.lhs, rep.rhs, rep.terms["rhs_sym"], rep.margin,
                         rep.terms["margin_sym"], rep.err_estimate, "|".join(passing) or "none"])
        lhs, rp, rs = povzner_one_body(k.cross_section, p, 1.0)
        summary.append({"p": p, "pairs": count, "passing": counts,
                        "one_body": {"lhs": lhs, "rhs_onesided": rp, "rhs_sym": rs,
                                     "margin_onesided": rp - lhs, "margin_sym": rs - lhs}})
    lhs, rp, rs = povzner_one_body(k.cross_section, 1.0, 1.0)
    boundary = {"p": 1.0, "xi_star": 0.0, "lhs": lhs, "rhs_onesided": rp, "rhs_sym": rs,
                "margin_onesided": rp - lhs, "margin_sym": rs - lhs}
    art.csv("povzner.csv", ["p", "pair", "lhs", "rhs_onesided", "rhs_sym", "margin_onesided",
                            "margin_sym", "err_estimate", "passing"], rows,
            {"quadrature": quad.__dict__})
    art.json("povzner.json", {"kernel": _kernel_info(k), "summary": summary,
                              "p1_boundary": boundary}, {"quadrature": quad.__dict__})


def cmd_weakform(cfg, art, seed):
    k = parse_kernel(cfg)
    d = parse_density(cfg, k.n)
    quad = parse_quad(cfg)
    tol = cfg.number(("tolerance",), 1e-10, lo=0.0)
    etas = cfg.get(("weakform", "eta"), ["0:" * (k.n - 1) + "0"])
    if not isinstance(etas, list) or not etas:
        raise cfg.error(("weakform", "eta"), "expected a non-empty list of multi-indices")
    phis = cfg.get(("weakform", "phi"), [{"kind": "power", "p": 1.0}])
    if not isinstance(phis, list) or not phis:
        raise cfg.error(("weakform", "phi"), "expected a non-empty list of test functions")
    phi_objs = [parse_phi(cfg, ("weakform", "phi", i)) for i in range(len(phis))]
    reports, leib, cons = [], [], []
    for i, e in enumerate(etas):
        eta = MultiIndex.parse(e)
        if eta.n != k.n:
            raise cfg.error(("weakform", "eta", i), f"multi-index needs {k.n} entries")
        for phi in phi_objs:
            rep = signed_bound_check(d, eta, phi, k, quad, case_id=f"{eta.label()}/{phi.name}",
                                     tolerance=tol)
            reports.append(rep.to_dict())
            lc = leibniz_check(d, eta, phi, k, quad)
            leib.append({"eta": eta.label(), "phi": phi.name, "weak_form": lc.weak_form,
                         "bilinear_sum": lc.bilinear_sum, "scale": lc.scale,
                         "rel_diff": lc.rel_diff})
    for phi in [TestFunction.power(0.0), TestFunction.power(1.0)] + \
            [TestFunction.component(a) for a in range(k.n)]:
        g, lo = weak_gain(d, d, phi, k, quad), weak_loss(d, d, phi, k, quad)
        cons.append({"phi": phi.name, "gain": g, "loss": lo, "difference": g - lo})
    findings = [r for r in reports if not r["passed"]]
    art.json("weakform.json", {"kernel": _kernel_info(k), "signed_bound": reports,
                               "leibniz": leib, "conservation": cons, "findings": findings},
             {"quadrature": quad.__dict__})


def _initial_z(d, ps, b):
    ms = abs_moments(d, ps, rule=build_shell_rule(d.n))
    return {float(p): m / math.gamma(p + b) for p, m in zip(ps, ms)}


def cmd_hierarchy(cfg, art, seed):
    k = parse_kernel(cfg)
    b = parse_b(cfg, k)
    d = parse_density(cfg, k.n)
    p_max = cfg.number(("hierarchy", "p_max"), 20.0, lo=3.0)
    ps = list(np.arange(3, int(round(2 * p_max)) + 1) / 2.0)
    z0 = _initial_z(d, ps, b)
    m01 = abs_moments(d, [0.0, 1.0], rule=build_shell_rule(d.n))
    w_norm = cfg.number(("hierarchy", "w_norm"), float(m01[0] + m01[1]), lo=0.0, lo_open=True)
    k0 = cfg.get(("hierarchy", "k0"), 1.0)
    k0 = calibrate_k0(k.alpha, b, ps) if k0 == "calibrate" else \
        cfg.number(("hierarchy", "k0"), 1.0, lo=0.0, lo_open=True)
    k1 = cfg.get(("hierarchy", "k1"), 1.0)
    k1 = calibrate_k1(k.alpha, b, ps) if k1 == "calibrate" else \
        cfg.number(("hierarchy", "k1"), 1.0, lo=0.0, lo_open=True)
    ka = cfg.get(("hierarchy", "k_alpha"), 1.0)
    ka = loss_lower_constant(d, k.alpha) if ka == "estimate" else \
        cfg.number(("hierarchy", "k_alpha"), 1.0, lo=0.0, lo_open=True)
    conv = cfg.get(("hierarchy", "convention"), "onesided")
    if conv not in ("onesided", "sym"):
        raise cfg.error(("hierarchy", "convention"), "convention must be 'onesided' or 'sym'")
    q = cfg.number(("hierarchy", "q"), None, lo=0.0, lo_open=True)
    if q is None:
        q = max(z0[p] ** (1.0 / p) for p in ps) * 1.1
    kk = max(1.0, max(z0[p] / q ** p for p in ps))
    hc = HierarchyConfig(k.cross_section, k.alpha, b=b, k0=k0, k1=k1, k_alpha=ka,
                         m0_sup=float(m01[0]), w_norm=w_norm, convention=conv, p_max=p_max)
    res = propagate_bounds(z0, kk, q, hc)
    rows = [[t["p"], t["branch"], math.exp(t["log_bound"]) if t["log_bound"] < 700 else math.inf,
             res.envelope(t["p"]) if t["p"] * math.log(res.Q) < 700 else math.inf,
             z0.get(t["p"], float("nan"))] for t in res.trace if t["p"] <= p_max]
    art.csv("bounds.csv", ["p", "branch", "bound", "envelope", "z_initial"], rows)
    out = res.to_dict()
    out.update({"inputs": {"k": kk, "q": q, "b": b, "k0": k0, "k1": k1, "k_alpha": ka,
                           "w_norm": w_norm, "convention": conv}, "kernel": _kernel_info(k)})
    art.json("hierarchy.json", out)


def cmd_dsmc(cfg, art, seed):
    k = parse_kernel(cfg)
    d = parse_density(cfg, k.n)
    N = int(cfg.number(("dsmc", "N"), 100_000, lo=2))
    t_end = cfg.number(("dsmc", "t_end"), 2.0, lo=0.0)
    every = cfg.number(("dsmc", "observe_every"), 0.5, lo=0.0, lo_open=True)
    frac = cfg.number(("dsmc", "dt_fraction"), 0.1, lo=0.0, lo_open=True)
    orders = cfg.get(("dsmc", "observe_orders"), [0, 1, 2, 3])
    if not isinstance(orders, list) or not orders:
        raise cfg.error(("dsmc", "observe_orders"), "expected a non-empty list of orders")
    orders = [float(p) for p in orders]
    try:
        e = init_from_density(d, N, seed, k)
    except (ValueError, RuntimeError) as exc:
        raise cfg.error(("density",), str(exc))
    tau = mean_free_time(e)
    tab = dsmc_run(e, t_end * tau, orders, every * tau, dt_fraction=frac)
    art.text("moments.csv", tab.to_csv(art.header({"time_unit": "model", "mean_free_time": tau})))
    art.json("run.json", {"kernel": _kernel_info(k), "N": N, "t_end_mft": t_end,
                          "observe_every_mft": every, "meta": tab.meta,
                          "rejection_efficiency": e.meta["rejection_efficiency"]})


def cmd_tails(cfg, art, seed):
    n = int(cfg.number(("kernel", "n"), 3))
    d = parse_density(cfg, n)
    s = cfg.number(("tails", "s"), 2.0, lo=0.0, lo_open=True, hi=2.0)
    k_max = int(cfg.number(("tails", "k_max"), 25, lo=4))
    window = int(cfg.number(("tails", "window"), 10, lo=3))
    if window > k_max:
        raise cfg.error(("tails", "window"), "window exceeds k_max")
    ps = [s * kk / 2.0 for kk in range(k_max + 1)]
    ms = abs_moments(d, ps, rule=build_shell_rule(n))
    est = tail_rate_from_sequence(ms, s, window=window)
    art.csv("tails.csv", ["k", "p", "m"], [[kk, p, m] for kk, (p, m) in enumerate(zip(ps, ms))])
    art.json("tails.json", est.to_dict())


def cmd_gainratio(cfg, art, seed):
    k = parse_kernel(cfg)
    rs = cfg.get(("gainratio", "r"), [0.25, 0.5])
    ss = cfg.get(("gainratio", "s"), [0, 1, 2])
    count = int(cfg.number(("gainratio", "count"), 10, lo=1))
    for i, r in enumerate(rs):
        if not isinstance(r, (int, float)) or r <= 0:
            raise cfg.error(("gainratio", "r", i), "rates must be positive numbers")
    for i, s in enumerate(ss):
        if not isinstance(s, int) or s < 0:
            raise cfg.error(("gainratio", "s", i), "weight powers must be nonnegative integers")
    rows, reps = [], []
    for r in rs:
        gs = gaussian_family(k.n, r, count, seed)
        for rep in gain_ratio_check(gs, r, k, s_values=ss):
            reps.append({"r": rep.r, "s": rep.s, "k_emp": rep.k_emp,
                         "tail_nonincreasing": rep.tail_nonincreasing, "l1_norms": rep.l1_norms})
            for gi, curve in enumerate(rep.ratios):
                for rho, v in zip(rep.radii, curve):
                    rows.append([rep.r, rep.s, gi, rho, v, v / rep.l1_norms[gi]])
    art.csv("gainratio.csv", ["r", "s", "density", "radius", "ratio", "ratio_over_l1"], rows)
    art.json("gainratio.json", {"kernel": _kernel_info(k), "reports": reps,
                                "k_emp": max(x["k_emp"] for x in reps)})


COMMANDS = {"gamma": cmd_gamma, "povzner": cmd_povzner, "weakform": cmd_weakform,
            "hierarchy": cmd_hierarchy, "dsmc": cmd_dsmc, "tails": cmd_tails,
            "gainratio": cmd_gainratio}


def run_subcommand(name, config_path, out, seed=0, threads=1):
    """Run one subcommand; returns the exit status (0 ok, 2 config error)."""
    try:
        cfg = load_config(config_path)
        art = Artifacts(out, cfg, name, seed, threads)
        COMMANDS[name](cfg, art, seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="kinmoments", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"kinmoments {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML config file")
        sp.add_argument("--seed", type=int, default=0, help="RNG seed (unsigned 64-bit)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="recorded in provenance; runs are single-threaded")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    return run_subcommand(args.command, args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
