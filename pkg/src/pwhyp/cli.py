"""Batch front end: config-driven experiments with reports and figures.

Usage: ``pwhyp <experiment> --config <path> [--seed N] [--out DIR]``.
Each run writes a versioned JSON summary, CSV traces, and PNG figures with
deterministic names into the output directory; the exit status is 0 only if
every enabled assertion passed (1 on assertion failure, 2 on bad config).
"""

import argparse
import configparser
import io
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import (
    geometry,
    graphs,
    reporting,
    scales,
    shadowing,
    splitting,
    stability,
    systems,
)
from .errors import AssertionFailure, ConfigError, ToolkitError

EXPERIMENTS = (
    "scales-check",
    "split",
    "grow-manifold",
    "shadow",
    "expansivity",
    "perturb-verify",
    "conjugacy",
)

_SCALE_KEYS = ("alpha", "beta", "gamma", "delta", "eps", "r0", "c_u", "c_s", "c_f", "rho")


@dataclass
class RunConfig:
    """Parsed run configuration; serializes back to canonical INI text."""

    system_kind: str = "cat"
    slow_radius: float = 0.16
    slow_exponent: float = 0.5
    scale_params: scales.ScaleParams = field(default_factory=scales.ScaleParams)
    experiment: str = "shadow"
    params: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"

    @classmethod
    def from_ini(cls, path):
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        try:
            sys_sec = parser["system"] if parser.has_section("system") else {}
            kind = sys_sec.get("kind", "cat")
            if kind not in ("cat", "slowdown"):
                raise ConfigError(f"unknown system kind {kind!r}")
            slow_radius = float(sys_sec.get("slow_radius", 0.16))
            slow_exponent = float(sys_sec.get("slow_exponent", 0.5))
            kw = {}
            if parser.has_section("scales"):
                for key in parser["scales"]:
                    if key not in _SCALE_KEYS:
                        raise ConfigError(f"unknown scales key {key!r}")
                    kw[key] = float(parser["scales"][key])
            try:
                sp = scales.ScaleParams(**kw)
            except ValueError as exc:
                raise ConfigError(f"invalid scale parameters: {exc}") from exc
            exp_sec = dict(parser["experiment"]) if parser.has_section("experiment") else {}
            experiment = exp_sec.pop("name", "shadow")
            if experiment not in EXPERIMENTS:
                raise ConfigError(f"unknown experiment {experiment!r}")
            seed = int(exp_sec.pop("seed", 0))
            out_sec = parser["output"] if parser.has_section("output") else {}
            out_dir = out_sec.get("directory", "out")
        except ConfigError:
            raise
        except Exception as exc:  # noqa: BLE001 - malformed numerics etc.
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls(
            system_kind=kind,
            slow_radius=slow_radius,
            slow_exponent=slow_exponent,
            scale_params=sp,
            experiment=experiment,
            params=exp_sec,
            seed=seed,
            out_dir=out_dir,
        )

    def to_ini_text(self):
        parser = configparser.ConfigParser()
        parser["system"] = {
            "kind": self.system_kind,
            "slow_exponent": repr(self.slow_exponent),
            "slow_radius": repr(self.slow_radius),
        }
        sp = self.scale_params
        parser["scales"] = {k: repr(getattr(sp, k)) for k in _SCALE_KEYS}
        exp = {"name": self.experiment, "seed": str(self.seed)}
        exp.update({k: str(v) for k, v in sorted(self.params.items())})
        parser["experiment"] = exp
        parser["output"] = {"directory": self.out_dir}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def get_int(self, key, default):
        return int(self.params.get(key, default))

    def get_float(self, key, default):
        return float(self.params.get(key, default))

    def get_floats(self, key, default):
        raw = self.params.get(key)
        if raw is None:
            return list(default)
        return [float(tok) for tok in str(raw).split(",") if tok.strip()]


def build_system(cfg: RunConfig):
    if cfg.system_kind == "cat":
        return systems.build_cat_map()
    return systems.build_slowdown_map(cfg.slow_radius, cfg.slow_exponent)


def _sample_points(cfg, system, rng, n, d_min=1e-3):
    pts = rng.random((int(n * 1.3) + 8, 2))
    if system.domain.kind == "complement":
        pts = pts[np.atleast_1d(geometry.boundary_dist(pts, system.domain)) > d_min]
    return pts[:n]


class _Checks:
    """Collects named pass/fail verdicts for the run summary."""

    def __init__(self):
        self.results = {}

    def record(self, name, ok, detail=None):
        self.results[name] = {"passed": bool(ok), "detail": detail}

    def first_failure(self):
        for name, res in self.results.items():
            if not res["passed"]:
                return name
        return None

    def all_passed(self):
        return all(r["passed"] for r in self.results.values())


# --- experiment runners -------------------------------------------------------------


def run_scales_check(cfg, system, sp, rng, out):
    checks = _Checks()
    n = cfg.get_int("n_samples", 10_000)
    d_min = cfg.get_float("d_min", 1e-3)
    samples = _sample_points(cfg, system, rng, n, d_min)

    margins = scales.check_rate_margins(sp, system, samples)
    checks.record("rate-margins", margins.passed, margins.summary())

    q = scales.chart_radius(sp, np.atleast_1d(geometry.boundary_dist(samples, system.domain)))
    ang = rng.uniform(0, 2 * np.pi, samples.shape[0])
    rad = rng.uniform(0, 1, samples.shape[0]) * q
    # mates sit within one chart radius of their sample, far above d_min,
    # so they cannot reach an excluded point
    mates = geometry.wrap(samples + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1))
    comp = scales.check_radius_comparability(sp, system.domain, list(zip(samples, mates)))
    checks.record("radius-comparability", comp.passed, comp.summary())

    sweep = scales.epsilon_threshold_sweep(sp, system, samples[: min(500, n)])
    verdicts = [ok for _, ok, _ in sweep["ladder"]]
    k = verdicts.index(False) if False in verdicts else len(verdicts)
    monotone = all(verdicts[:k]) and not any(verdicts[k:])
    checks.record(
        "sweep-monotone",
        monotone and sweep["first_failing_eps"] is not None,
        {"first_failing_eps": sweep["first_failing_eps"]},
    )

    growth_samples = None
    if system.domain.kind == "complement":
        n_growth = cfg.get_int("n_growth_samples", 300)
        r = rng.uniform(0.3 * sp.r0, sp.r0, n_growth)
        th = rng.uniform(0, 2 * np.pi, n_growth)
        growth_samples = geometry.wrap(
            system.domain.excluded_points[0]
            + np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
        )
    assumptions = systems.verify_assumptions(
        system,
        sp,
        sample_resolution=cfg.get_int("resolution", 16),
        window=cfg.get_int("window", 20),
        d_min=d_min,
        growth_samples=growth_samples,
    )
    for name, section in (
        ("assumption-products-u", assumptions.products_u),
        ("assumption-products-s", assumptions.products_s),
        ("assumption-growth-u", assumptions.boundary_growth_u),
        ("assumption-growth-s", assumptions.boundary_growth_s),
        ("assumption-regularity", assumptions.regularity),
        ("assumption-aperture-transport", assumptions.aperture_transport),
    ):
        checks.record(name, section["passed"])

    d_sweep = np.geomspace(max(d_min, 1e-4), 1.0, 200)
    budget = scales.budget_scale(sp, d_sweep)
    radius = scales.chart_radius(sp, d_sweep)
    csv = reporting.write_csv(
        out / f"scales-{cfg.seed}.csv",
        ["d", "budget_scale", "chart_radius"],
        [d_sweep, budget, radius],
    )
    fig = reporting.scales_figure(out / f"scales-check-{cfg.seed}.png", d_sweep, budget, radius)
    summary = {
        "margins": margins.summary(),
        "comparability": comp.summary(),
        "sweep": {"first_failing_eps": sweep["first_failing_eps"]},
        "assumptions": assumptions.summary(),
    }
    return summary, checks, [csv, fig]


def run_split(cfg, system, sp, rng, out):
    checks = _Checks()
    res = cfg.get_int("resolution", 16)
    axis = (np.arange(res) + 0.5) / res
    gu, gv = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gu.ravel(), gv.ravel()], axis=-1)
    if system.domain.kind == "complement":
        pts = pts[np.atleast_1d(geometry.boundary_dist(pts, system.domain)) > cfg.get_float("d_min", 1e-3)]
    spl = splitting.compute_splitting_batch(
        system, pts, n_iters=splitting.RATE_ITERS, tol=splitting.RATE_TOL,
        stall_tol=splitting.RATE_STALL,
    )
    checks.record(
        "hyperbolic-rates",
        bool(np.all(spl.m_u > 1.0) and np.all(spl.n_s < 1.0)),
        {"min_m_u": float(np.min(spl.m_u)), "max_n_s": float(np.max(spl.n_s))},
    )
    img = np.atleast_2d(system.forward(pts))
    spl_img = splitting.compute_splitting_batch(
        system, img, n_iters=splitting.RATE_ITERS, tol=splitting.RATE_TOL,
        stall_tol=splitting.RATE_STALL,
    )
    duality = float(np.max(np.abs(spl.n_s * spl_img.m_s_inv - 1.0)))
    checks.record("duality-identity", duality <= 1e-8, {"max_dev": duality})
    pushed = np.einsum("nij,nj->ni", system.jacobian(pts), spl.e_u)
    pushed /= np.linalg.norm(pushed, axis=-1, keepdims=True)
    sin = float(np.max(np.abs(pushed[:, 0] * spl_img.e_u[:, 1] - pushed[:, 1] * spl_img.e_u[:, 0])))
    checks.record("direction-invariance", sin <= 1e-8, {"max_sin": sin})
    checks.record(
        "frame-determinant",
        bool(np.all(np.abs(spl.det()) >= splitting.MIN_FRAME_DET)),
        {"min_det": float(np.min(np.abs(spl.det())))},
    )
    kappa_u, kappa_s = splitting.cone_aperture(sp, system, pts, spl)
    checks.record(
        "apertures-positive",
        bool(np.all(kappa_u > 0) and np.all(kappa_s > 0)),
        {"min_kappa_u": float(np.min(kappa_u)), "min_kappa_s": float(np.min(kappa_s))},
    )
    csv = reporting.write_csv(
        out / f"splitting-{cfg.seed}.csv",
        ["x_u", "x_v", "eu_u", "eu_v", "es_u", "es_v", "m_u", "n_s", "kappa_u", "kappa_s"],
        [pts[:, 0], pts[:, 1], spl.e_u[:, 0], spl.e_u[:, 1], spl.e_s[:, 0], spl.e_s[:, 1],
         spl.m_u, spl.n_s, np.atleast_1d(kappa_u), np.atleast_1d(kappa_s)],
    )
    fig = reporting.split_figure(out / f"split-{cfg.seed}.png", pts, spl)
    summary = {
        "n_points": int(pts.shape[0]),
        "min_m_u": float(np.min(spl.m_u)),
        "max_n_s": float(np.max(spl.n_s)),
        "duality_max_dev": duality,
        "invariance_max_sin": sin,
    }
    return summary, checks, [csv, fig]


def run_grow_manifold(cfg, system, sp, rng, out):
    checks = _Checks()
    K = cfg.get_int("k", 40)
    kick = cfg.get_float("kick", 0.1)
    x0 = np.array([cfg.get_float("base_u", 0.3), cfg.get_float("base_v", 0.4)])
    po = shadowing.make_noisy_orbit(
        system, sp, x0, K, kick, seed=cfg.seed, d_min=cfg.get_float("d_min", 1e-3)
    )
    checks.record("pseudo-orbit-valid", po.all_valid() and po.products_ok())
    w_u = shadowing.local_unstable_manifold(system, sp, po, verify_seed_independence=True, rng=rng)
    w_s = shadowing.local_stable_manifold(system, sp, po, verify_seed_independence=True, rng=rng)
    ok_u, _ = graphs.admissibility_check(w_u, sp)
    ok_s, _ = graphs.admissibility_check(w_s, sp)
    checks.record("manifolds-admissible", ok_u and ok_s)

    lm = shadowing._chart_for_step(system, sp, po, 1)
    n_pairs = cfg.get_int("n_pairs", 500)
    bound = float(np.sqrt(lm.frame_x.n_s)) + 2 * (2 * lm.q_x / (graphs.N_GRID - 1))
    worst = 0.0
    for _ in range(n_pairs):
        w1 = graphs.random_admissible_manifold(rng, sp, lm.x, "u", lm.q_x, lm.frame_x)
        w2 = graphs.random_admissible_manifold(rng, sp, lm.x, "u", lm.q_x, lm.frame_x)
        worst = max(worst, graphs.contraction_factor(lm, w1, w2, sp))
    checks.record(
        "contraction-bound", worst <= bound, {"worst_factor": worst, "bound": bound}
    )

    J = system.jacobian(rng.random((4, 2)))
    linear = bool(np.max(np.abs(J - J[0])) < 1e-14)
    if linear:
        dev = 0.0
        for s in (-0.3, -0.05, 0.02, 0.25):
            w = graphs.make_manifold(lm.x, "u", lm.q_x, lm.frame_x, lambda v: s * v)
            img = graphs.graph_transform_u(lm, w, sp)
            slope = np.polyfit(img.grid(), img.phi, 1)[0]
            dev = max(dev, abs(slope - graphs.linear_graph_slope_image(lm, s)))
        checks.record("linear-slope-oracle", dev <= 1e-12, {"max_dev": dev})

    csv = reporting.manifold_csv(out / f"manifold-{cfg.seed}.csv", w_u)
    fig = reporting.manifold_figure(out / f"grow-manifold-{cfg.seed}.png", w_u)
    summary = {
        "K": K,
        "kick_fraction": kick,
        "sup_phi_u": float(np.max(np.abs(w_u.phi))),
        "sup_phi_s": float(np.max(np.abs(w_s.phi))),
        "contraction_worst": worst,
        "contraction_bound": bound,
        "linear": linear,
    }
    return summary, checks, [csv, fig]


def run_shadow(cfg, system, sp, rng, out):
    checks = _Checks()
    K = cfg.get_int("k", 100)
    kicks = cfg.get_floats("kicks", (0.0, 0.01, 0.1, 0.5))
    n_orbits = cfg.get_int("n_orbits", 1000)
    d_min = cfg.get_float("d_min", 1e-3)

    J = system.jacobian(rng.random((4, 2)))
    linear = bool(np.max(np.abs(J - J[0])) < 1e-14)

    distances = []
    residuals = []
    zero_ok = True
    banded_dev = 0.0
    all_passed = True
    first_po = None
    first_cert = None
    attempts_left = 3 * n_orbits
    solved = 0
    i = 0
    while solved < n_orbits and attempts_left > 0:
        attempts_left -= 1
        i += 1
        frac = kicks[solved % len(kicks)]
        base = _sample_points(cfg, system, rng, 1, d_min=max(d_min, 0.05 if system.domain.kind == "complement" else d_min))[0]
        try:
            po = shadowing.make_noisy_orbit(
                system, sp, base, K, frac, seed=cfg.seed * 1_000_003 + i, d_min=d_min
            )
            cert = shadowing.shadow_point(system, sp, po)
        except ToolkitError:
            # a window drifting too close to the boundary is a precondition
            # rejection, not a certificate failure; redraw the base point
            continue
        solved += 1
        distances.append(cert.distance_to_x0)
        residuals.append(cert.fixed_point_residual)
        all_passed &= cert.passed
        if frac == 0.0 and cert.distance_to_x0 > 1e-12:
            zero_ok = False
        if linear:
            banded = shadowing.linear_shadow_solve(system, po)
            banded_dev = max(banded_dev, float(geometry.torus_dist(cert.shadow, banded)))
        if first_po is None:
            first_po, first_cert = po, cert
    checks.record(
        "shadow-certificates",
        all_passed and len(distances) == n_orbits,
        {"n_solved": len(distances), "max_distance": float(np.max(distances))},
    )
    if 0.0 in kicks:
        checks.record("zero-noise-identity", zero_ok)
    if linear:
        checks.record("banded-agreement", banded_dev <= 1e-12, {"max_dev": banded_dev})

    gaps = np.array(
        [
            geometry.torus_dist(p, first_po.window[n])
            for n, p in _iterate_window(system, first_cert.shadow, first_po.K)
        ]
    )
    csv = reporting.orbit_trace_csv(out / f"orbit-{cfg.seed}.csv", first_po, gaps)
    fig1 = reporting.shadow_figure(
        out / f"shadow-{cfg.seed}.png", first_po, first_cert, gaps
    )
    fig2 = reporting.shadow_batch_figure(
        out / f"shadow-hist-{cfg.seed}.png", distances, first_cert.q0 / shadowing.CERT_DENOM
    )
    first_validation = shadowing.validate_pseudo_orbit(system, sp, first_po)
    summary = {
        "K": K,
        "kick_fractions": kicks,
        "n_orbits": n_orbits,
        "max_distance": float(np.max(distances)),
        "mean_distance": float(np.mean(distances)),
        "certificate_bound": float(first_cert.q0 / shadowing.CERT_DENOM),
        "max_fixed_point_residual": float(np.max(residuals)),
        "banded_max_dev": float(banded_dev) if linear else None,
        "first_certificate": first_cert.summary(),
        "first_orbit_validation": first_validation.summary(),
    }
    return summary, checks, [csv, fig1, fig2]


def _iterate_window(system, point, K):
    yield 0 + K, np.asarray(point, dtype=float)
    p = np.asarray(point, dtype=float)
    for n in range(1, K + 1):
        p = system.forward(p)
        yield K + n, p
    p = np.asarray(point, dtype=float)
    for n in range(1, K + 1):
        p = system.backward(p)
        yield K - n, p


def run_expansivity(cfg, system, sp, rng, out):
    checks = _Checks()
    n_pairs = cfg.get_int("n_pairs", 100)
    sep = cfg.get_float("separation", 1e-3)
    window = cfg.get_int("window", 8)
    max_index = cfg.get_int("max_index", 6)
    d_min = 0.05 if system.domain.kind == "complement" else 1e-3
    xs = _sample_points(cfg, system, rng, n_pairs, d_min=d_min)
    ang = rng.uniform(0, 2 * np.pi, n_pairs)
    ys = geometry.wrap(xs + sep * np.stack([np.cos(ang), np.sin(ang)], axis=-1))
    indices = shadowing.expansivity_batch(system, sp, xs, ys, window)
    separated = [v for v in indices if v is not None]
    checks.record(
        "pairs-separate",
        len(separated) == n_pairs and max(abs(v) for v in separated) <= max_index,
        {"n_separated": len(separated)},
    )
    same = shadowing.expansivity_test(system, sp, xs[0], xs[0], window)
    checks.record("identity-never-separates", not same.separated)
    csv = reporting.write_csv(
        out / f"pairs-{cfg.seed}.csv",
        ["x_u", "x_v", "y_u", "y_v", "index"],
        [xs[:, 0], xs[:, 1], ys[:, 0], ys[:, 1],
         np.array([10**9 if v is None else v for v in indices])],
    )
    fig = reporting.expansivity_figure(out / f"expansivity-{cfg.seed}.png", indices, window)
    summary = {
        "n_pairs": n_pairs,
        "separation": sep,
        "max_abs_index": max(abs(v) for v in separated) if separated else None,
        "index_histogram": {str(k): int(sum(1 for v in separated if v == k))
                            for k in sorted(set(separated))},
    }
    return summary, checks, [csv, fig]


def _bump_from_config(cfg, system, sp):
    center = (cfg.get_float("bump_u", 0.3), cfg.get_float("bump_v", 0.6))
    radius = cfg.get_float("bump_radius", 0.1)
    fraction = cfg.get_float("budget_fraction", 0.5)
    if fraction == 0.0:
        amp = 0.0
    else:
        amp = systems.amplitude_for_budget_fraction(system, sp, center, radius, fraction)
    g, budget = systems.build_perturbation(system, sp, center, amp, radius)
    return g, budget, center, radius, amp


def run_perturb_verify(cfg, system, sp, rng, out):
    checks = _Checks()
    g, budget, center, radius, amp = _bump_from_config(cfg, system, sp)
    checks.record("budget-respected", budget.worst_ratio < 1.0, budget.summary())
    res = cfg.get_int("resolution", 32)
    axis = (np.arange(res) + 0.5) / res
    gu, gv = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gu.ravel(), gv.ravel()], axis=-1)
    if system.domain.kind == "complement":
        pts = pts[np.atleast_1d(geometry.boundary_dist(pts, system.domain)) > cfg.get_float("d_min", 1e-3)]
    n_dirs = cfg.get_int("n_dirs", 16)
    ok_inv, m_inv = splitting.cone_invariance_check(g, sp, system, pts, n_dirs=n_dirs)
    checks.record(
        "cone-invariance", bool(np.all(ok_inv)), {"min_margin": float(np.min(m_inv))}
    )
    ok_gro, m_gro = splitting.cone_growth_check(g, sp, system, pts, n_dirs=n_dirs)
    checks.record(
        "box-norm-growth", bool(np.all(ok_gro)), {"min_margin": float(np.min(m_gro))}
    )
    spl_g = splitting.perturbed_splitting_batch(g, sp, system, pts)
    checks.record(
        "perturbed-hyperbolic",
        bool(np.all(spl_g.m_u > 1.0) and np.all(spl_g.n_s < 1.0)),
        {"min_m_u": float(np.min(spl_g.m_u)), "max_n_s": float(np.max(spl_g.n_s))},
    )
    spl_f = splitting.compute_splitting_batch(system, pts)
    dev = float(np.max(np.linalg.norm(spl_g.e_u - spl_f.e_u, axis=-1)))
    ratio = np.maximum(budget.realized_c0_gap(pts), budget.realized_c1_gap(pts))
    bound_arr = systems.perturbation_bound(system, sp, pts)
    csv = reporting.write_csv(
        out / f"budget-{cfg.seed}.csv",
        ["x_u", "x_v", "realized_gap", "budget", "invariance_margin", "growth_margin"],
        [pts[:, 0], pts[:, 1], ratio, bound_arr, np.atleast_1d(m_inv), np.atleast_1d(m_gro)],
    )
    fig = reporting.perturb_figure(
        out / f"perturb-verify-{cfg.seed}.png", pts, ratio / bound_arr
    )
    summary = {
        "amplitude": amp,
        "bump_center": list(center),
        "bump_radius": radius,
        "worst_budget_ratio": budget.worst_ratio,
        "direction_deviation": dev,
        "min_invariance_margin": float(np.min(m_inv)),
        "min_growth_margin": float(np.min(m_gro)),
    }
    return summary, checks, [csv, fig]


def run_conjugacy(cfg, system, sp, rng, out):
    checks = _Checks()
    g, budget, center, radius, amp = _bump_from_config(cfg, system, sp)
    res = cfg.get_int("resolution", 32)
    K = cfg.get_int("k", 100)
    fld = stability.conjugacy_field(system, g, sp, resolution=res, K=K)
    checks.record("field-complete", not fld.failures, {"n_failures": len(fld.failures)})
    checks.record(
        "conjugacy-residual",
        fld.sup_residual() <= stability.TOL_CONJ,
        {"sup_residual": fld.sup_residual()},
    )
    checks.record(
        "displacement-bound",
        fld.sup_displacement_ratio() <= 1.0 / shadowing.CERT_DENOM + 1e-9,
        {"sup_ratio": fld.sup_displacement_ratio()},
    )
    if amp == 0.0:
        checks.record(
            "zero-perturbation-identity",
            float(np.max(fld.displacement)) <= 1e-12,
            {"sup_displacement": float(np.max(fld.displacement))},
        )
    else:
        untouched = []
        for i in range(fld.grid.shape[0]):
            window = stability.g_orbit_window(g, fld.grid[i], K)
            if np.all(geometry.torus_dist(window, np.asarray(center)) > radius):
                untouched.append(i)
        if untouched:
            sup_id = float(np.max(fld.displacement[untouched]))
            checks.record("identity-outside-influence", sup_id <= 1e-12, {"sup": sup_id})
    n_pairs = cfg.get_int("n_pairs", 100)
    xs = _sample_points(cfg, system, rng, n_pairs)
    ang = rng.uniform(0, 2 * np.pi, n_pairs)
    ys = geometry.wrap(xs + cfg.get_float("separation", 1e-3)
                       * np.stack([np.cos(ang), np.sin(ang)], axis=-1))
    inj = stability.injectivity_probe(g, sp, fld, list(zip(xs, ys)),
                                      max_n=cfg.get_int("max_index", 8))
    checks.record("injectivity-resolved", inj.passed(), inj.summary())
    spacing = 1.0 / res
    cover = cfg.get_float("cover_radius", spacing + float(np.max(fld.displacement)))
    surj = stability.surjectivity_probe(fld, cover)
    checks.record("surjectivity-cover", surj.passed, surj.summary())
    lam = cfg.get_float("lambda", 1e-3)
    try:
        k_cont = stability.continuity_probe(system, sp, fld, fld.grid[0], lam)
    except ToolkitError:
        k_cont = None
    csv = reporting.field_csv(out / f"field-{cfg.seed}.csv", fld)
    fig = reporting.conjugacy_figure(out / f"conjugacy-{cfg.seed}.png", fld)
    summary = {
        "amplitude": amp,
        "field": fld.summary(),
        "injectivity": inj.summary(),
        "surjectivity": surj.summary(),
        "continuity_K": k_cont,
    }
    return summary, checks, [csv, fig]


_RUNNERS = {
    "scales-check": run_scales_check,
    "split": run_split,
    "grow-manifold": run_grow_manifold,
    "shadow": run_shadow,
    "expansivity": run_expansivity,
    "perturb-verify": run_perturb_verify,
    "conjugacy": run_conjugacy,
}


def run(cfg: RunConfig):
    """Execute one experiment; returns (exit_status, summary_path)."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    system = build_system(cfg)
    sp = cfg.scale_params
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    summary, checks, artifacts = _RUNNERS[cfg.experiment](cfg, system, sp, rng, out)
    elapsed = time.perf_counter() - t0
    payload = {
        "experiment": cfg.experiment,
        "system": cfg.system_kind,
        "seed": cfg.seed,
        "summary": summary,
        "checks": checks.results,
        "artifacts": [Path(a).name for a in artifacts],
    }
    json_path = reporting.write_json(out / f"{cfg.experiment}-{cfg.seed}.json", payload)
    for name, res in checks.results.items():
        print(f"[{'PASS' if res['passed'] else 'FAIL'}] {name}")
    print(f"wrote {json_path} ({elapsed:.1f}s)")
    failure = checks.first_failure()
    if failure is not None:
        raise AssertionFailure(f"check failed: {failure}", invariant=failure)
    return 0, json_path


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="pwhyp",
        description="pointwise hyperbolic dynamics experiments on the flat 2-torus",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="override output directory")
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_ini(args.config)
        cfg = replace(cfg, experiment=args.experiment)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AssertionFailure as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 1
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
