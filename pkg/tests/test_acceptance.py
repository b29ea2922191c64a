"""Acceptance suite: one test per criterion, each printing a PASS line.

Criteria run at their stated tolerances on the shipped default parameters;
the heavy ones carry their runtime targets as assertions.  Everything here
is also reachable through single CLI invocations (see the README), but the
suite drives the library directly so the numbers land in the test log.
"""

import time

import numpy as np
import pytest

from pwhyp import (
    geometry,
    graphs,
    scales,
    shadowing,
    splitting,
    stability,
    systems,
)

from conftest import SLOW_RADIUS, SLOW_EXPONENT
from oracles import eigen_data, banded_linear_shadow

LAM_S, LAM_U, E_S, E_U = eigen_data(systems.CAT_MATRIX)

BUMP_CENTER = (0.3, 0.6)
BUMP_RADIUS = 0.1


def _report(name, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def cat_sys():
    return systems.build_cat_map()


@pytest.fixture(scope="module")
def cat_sp():
    return scales.ScaleParams()


@pytest.fixture(scope="module")
def slow_sys():
    return systems.build_slowdown_map(SLOW_RADIUS, SLOW_EXPONENT)


@pytest.fixture(scope="module")
def slow_sp():
    return scales.ScaleParams(
        alpha=0.5, beta=0.5, gamma=1.2, delta=0.08, eps=0.3, r0=0.055, c_f=3.5
    )


@pytest.fixture(scope="module")
def bump(cat_sys, cat_sp):
    amp = systems.amplitude_for_budget_fraction(
        cat_sys, cat_sp, BUMP_CENTER, BUMP_RADIUS, 0.5
    )
    g, budget = systems.build_perturbation(cat_sys, cat_sp, BUMP_CENTER, amp, BUMP_RADIUS)
    return g, budget, amp


def test_criterion_1_shadowing_certificates(cat_sys, cat_sp):
    """1000 strict pseudo-orbits (K=100) certify d <= Q/50 with containment, < 60 s."""
    rng = np.random.default_rng(20240801)
    kicks = (0.0, 0.01, 0.1, 0.5)
    n_orbits = 1000
    K = 100
    t0 = time.perf_counter()
    worst = 0.0
    q50 = None
    for i in range(n_orbits):
        base = rng.random(2)
        po = shadowing.make_noisy_orbit(
            cat_sys, cat_sp, base, K, kicks[i % 4], seed=90_000 + i
        )
        cert = shadowing.shadow_point(cat_sys, cat_sp, po)
        assert cert.passed and cert.containment_horizon == K
        worst = max(worst, cert.distance_to_x0)
        q50 = cert.q0 / shadowing.CERT_DENOM
    elapsed = time.perf_counter() - t0
    _report(
        "criterion-1 shadowing certificates",
        worst <= q50 and elapsed < 60.0,
        f"n={n_orbits}, max distance {worst:.3e} <= Q/50 = {q50:.3e}, {elapsed:.1f}s",
    )


def test_criterion_2_zero_noise_identity(cat_sys, cat_sp):
    """Zero kicks shadow to the base point; g = f gives the identity field."""
    rng = np.random.default_rng(4)
    worst_shadow = 0.0
    for i in range(10):
        po = shadowing.make_noisy_orbit(cat_sys, cat_sp, rng.random(2), 60, 0.0, seed=i)
        cert = shadowing.shadow_point(cat_sys, cat_sp, po)
        worst_shadow = max(
            worst_shadow, geometry.torus_dist(cert.shadow, po.point(0))
        )
    fld = stability.conjugacy_field(cat_sys, cat_sys, cat_sp, resolution=4, K=60)
    worst_field = float(np.max(fld.displacement))
    _report(
        "criterion-2 zero-noise identity",
        worst_shadow <= 1e-12 and worst_field <= 1e-12,
        f"shadow dev {worst_shadow:.2e}, field dev {worst_field:.2e} (both <= 1e-12)",
    )


def test_criterion_3_contraction_lemma(cat_sys, cat_sp, slow_sys, slow_sp):
    """Measured transform contraction <= sqrt(contracting rate) + 2*spacing, 500 pairs/system."""
    rng = np.random.default_rng(60)
    results = {}
    for name, system, sp, base in (
        ("cat", cat_sys, cat_sp, np.array([0.3, 0.4])),
        ("slowdown", slow_sys, slow_sp, np.array([0.12, 0.05])),
    ):
        y = system.forward(base)
        lm = graphs.local_map(system, sp, base, np.asarray(y))
        spacing = 2 * lm.q_x / (graphs.N_GRID - 1)
        bound = float(np.sqrt(lm.frame_x.n_s)) + 2 * spacing
        worst = 0.0
        for _ in range(500):
            w1 = graphs.random_admissible_manifold(rng, sp, lm.x, "u", lm.q_x, lm.frame_x)
            w2 = graphs.random_admissible_manifold(rng, sp, lm.x, "u", lm.q_x, lm.frame_x)
            worst = max(worst, graphs.contraction_factor(lm, w1, w2, sp))
        results[name] = (worst, bound)
        assert worst <= bound, (name, worst, bound)
    ref = float(np.sqrt(LAM_S))
    _report(
        "criterion-3 contraction lemma",
        all(w <= b for w, b in results.values()) and abs(ref - 0.618034) < 1e-6,
        ", ".join(f"{k}: {w:.4f} <= {b:.4f}" for k, (w, b) in results.items())
        + f"; cat reference sqrt bound {ref:.6f}",
    )


def test_criterion_4_linear_map_oracles(cat_sys, cat_sp):
    """Transform matches the closed-form slope map and the banded solve to 1e-12."""
    x = np.array([0.3, 0.4])
    lm = graphs.local_map(cat_sys, cat_sp, x, np.asarray(cat_sys.forward(x)))
    slope_dev = 0.0
    for s in (-0.4, -0.1, 0.03, 0.2, 0.45):
        w = graphs.make_manifold(x, "u", lm.q_x, lm.frame_x, lambda v: s * v)
        out = graphs.graph_transform_u(lm, w, cat_sp)
        expected = graphs.linear_graph_slope_image(lm, s)
        fitted = np.polyfit(out.grid(), out.phi, 1)[0]
        slope_dev = max(slope_dev, abs(fitted - expected))

    rng = np.random.default_rng(41)
    banded_dev = 0.0
    for i in range(20):
        po = shadowing.make_noisy_orbit(
            cat_sys, cat_sp, rng.random(2), 80, 0.25, seed=500 + i
        )
        cert = shadowing.shadow_point(cat_sys, cat_sp, po)
        via_banded = shadowing.linear_shadow_solve(cat_sys, po)
        banded_dev = max(banded_dev, float(geometry.torus_dist(cert.shadow, via_banded)))
        defects = geometry.shortest_rep(
            cat_sys.forward(po.window[:-1]) - po.window[1:]
        )
        w0 = banded_linear_shadow(systems.CAT_MATRIX, po.K, defects)
        dense_pt = geometry.wrap(po.point(0) + w0)
        banded_dev = max(banded_dev, float(geometry.torus_dist(cert.shadow, dense_pt)))
    _report(
        "criterion-4 linear-map oracles",
        slope_dev <= 1e-12 and banded_dev <= 1e-12,
        f"slope dev {slope_dev:.2e}, banded dev {banded_dev:.2e} (both <= 1e-12)",
    )


def test_criterion_5_expansivity(cat_sys, cat_sp):
    """100 random pairs at separation 1e-3 split within |n| <= 6; x = y never."""
    rng = np.random.default_rng(8)
    xs = rng.random((100, 2))
    ang = rng.uniform(0, 2 * np.pi, 100)
    ys = geometry.wrap(xs + 1e-3 * np.stack([np.cos(ang), np.sin(ang)], axis=-1))
    indices = shadowing.expansivity_batch(cat_sys, cat_sp, xs, ys, 8)
    all_sep = all(v is not None and abs(v) <= 6 for v in indices)
    same = shadowing.expansivity_test(cat_sys, cat_sp, xs[0], xs[0], 40)
    _report(
        "criterion-5 expansivity",
        all_sep and not same.separated,
        f"separations within |n| <= {max(abs(v) for v in indices)}; identical pair never",
    )


def test_criterion_6_margin_and_comparability_suites(cat_sys, cat_sp, slow_sys, slow_sp):
    """Rate margins and radius comparability pass at 1e4 samples per system."""
    rng = np.random.default_rng(12)
    details = []
    for name, system, sp in (("cat", cat_sys, cat_sp), ("slowdown", slow_sys, slow_sp)):
        pts = rng.random((13_000, 2))
        if system.domain.kind == "complement":
            pts = pts[geometry.boundary_dist(pts, system.domain) > 1e-3]
        pts = pts[:10_000]
        margins = scales.check_rate_margins(sp, system, pts)
        assert margins.passed, name
        q = scales.chart_radius(sp, np.atleast_1d(geometry.boundary_dist(pts, system.domain)))
        ang = rng.uniform(0, 2 * np.pi, pts.shape[0])
        rad = rng.uniform(0, 1, pts.shape[0]) * q
        mates = geometry.wrap(pts + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1))
        comp = scales.check_radius_comparability(sp, system.domain, list(zip(pts, mates)))
        assert comp.passed, name
        sweep = scales.epsilon_threshold_sweep(sp, system, pts[:400])
        verdicts = [ok for _, ok, _ in sweep["ladder"]]
        k = verdicts.index(False) if False in verdicts else len(verdicts)
        assert all(verdicts[:k]) and not any(verdicts[k:]), name
        assert sweep["first_failing_eps"] is not None
        details.append(
            f"{name}: slack {margins.worst_slack:.3g}, ratios "
            f"[{comp.worst_ratio_low:.3f}, {comp.worst_ratio_high:.3f}], "
            f"eps onset {sweep['first_failing_eps']:.3g}"
        )
    _report("criterion-6 margin/comparability suites", True, "; ".join(details))


def test_criterion_7_perturbation_theorem(cat_sys, cat_sp, bump):
    """Cone invariance, box growth >= sqrt(m_u), perturbed splitting on 32x32."""
    g, budget, _ = bump
    res = 32
    axis = (np.arange(res) + 0.5) / res
    gu, gv = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gu.ravel(), gv.ravel()], axis=-1)
    ok_inv, m_inv = splitting.cone_invariance_check(g, cat_sp, cat_sys, pts)
    ok_gro, m_gro = splitting.cone_growth_check(g, cat_sp, cat_sys, pts)
    spl_g = splitting.perturbed_splitting_batch(g, cat_sp, cat_sys, pts)
    hyper = bool(np.all(spl_g.m_u > 1.0) and np.all(spl_g.n_s < 1.0))
    _report(
        "criterion-7 perturbation theorem",
        bool(np.all(ok_inv) and np.all(ok_gro) and hyper),
        f"invariance margin >= {float(np.min(m_inv)):.3f}, growth margin >= "
        f"{float(np.min(m_gro)):.3f}, rates in ({float(np.min(spl_g.m_u)):.3f}, "
        f"{float(np.max(spl_g.n_s)):.3f})",
    )


def test_criterion_8_stability_theorem(cat_sys, cat_sp, bump):
    """Conjugacy field on 32x32, K=100: residual, displacement, probes, < 5 min."""
    g, _, _ = bump
    t0 = time.perf_counter()
    fld = stability.conjugacy_field(cat_sys, g, cat_sp, resolution=32, K=100)
    assert not fld.failures
    sup_res = fld.sup_residual()
    sup_ratio = fld.sup_displacement_ratio()

    # identity at points whose window misses the support
    untouched = []
    for i in range(fld.grid.shape[0]):
        window = stability.g_orbit_window(g, fld.grid[i], 100)
        if np.all(geometry.torus_dist(window, np.asarray(BUMP_CENTER)) > BUMP_RADIUS):
            untouched.append(i)
    sup_id = float(np.max(fld.displacement[untouched])) if untouched else 0.0

    rng = np.random.default_rng(88)
    xs = rng.random((100, 2))
    ang = rng.uniform(0, 2 * np.pi, 100)
    ys = geometry.wrap(xs + 1e-3 * np.stack([np.cos(ang), np.sin(ang)], axis=-1))
    inj = stability.injectivity_probe(g, cat_sp, fld, list(zip(xs, ys)))

    spacing = 1.0 / 32
    surj = stability.surjectivity_probe(fld, spacing + float(np.max(fld.displacement)))
    elapsed = time.perf_counter() - t0
    _report(
        "criterion-8 stability theorem",
        sup_res <= 1e-9
        and sup_ratio <= 1.0 / 50
        and sup_id <= 1e-12
        and inj.passed()
        and surj.passed
        and elapsed < 300.0,
        f"residual {sup_res:.2e} <= 1e-9, displacement/Q {sup_ratio:.2e} <= 1/50, "
        f"identity-off-support {sup_id:.2e}, injectivity {inj.resolved}/{inj.total}, "
        f"cover gap {surj.max_gap:.3f} <= {surj.cover_radius:.3f}, {elapsed:.0f}s",
    )


def test_criterion_9_boundary_degeneration(slow_sys, slow_sp):
    """Slowdown map: growth fits > 1 on the annulus; shadowing and expansivity
    at base points d >= 0.05; chart radius shrinks toward the boundary."""
    rng = np.random.default_rng(9)
    r = rng.uniform(0.3 * slow_sp.r0, slow_sp.r0, 300)
    th = rng.uniform(0, 2 * np.pi, 300)
    ann = geometry.wrap(np.stack([r * np.cos(th), r * np.sin(th)], axis=-1))
    rep = systems.verify_assumptions(
        slow_sys, slow_sp, sample_resolution=10, window=12, d_min=2e-3,
        growth_samples=ann,
    )
    growth_ok = (
        rep.boundary_growth_u["passed"]
        and rep.boundary_growth_s["passed"]
        and rep.boundary_growth_u["fitted_constant"] > 1.0
        and rep.boundary_growth_s["fitted_constant"] > 1.0
    )

    # shadowing at base points away from the excluded fixed point
    n_orbit = 0
    worst_ratio = 0.0
    attempts = 0
    while n_orbit < 6 and attempts < 40:
        attempts += 1
        base = rng.random(2)
        if geometry.boundary_dist(base, slow_sys.domain) < 0.05:
            continue
        try:
            po = shadowing.make_noisy_orbit(
                slow_sys, slow_sp, base, 25, 0.1, seed=700 + attempts
            )
            cert = shadowing.shadow_point(slow_sys, slow_sp, po)
        except Exception:
            continue
        assert cert.passed
        worst_ratio = max(worst_ratio, cert.distance_to_x0 / (cert.q0 / 50))
        n_orbit += 1
    shadow_ok = n_orbit >= 6

    xs = []
    while len(xs) < 20:
        cand = rng.random(2)
        if geometry.boundary_dist(cand, slow_sys.domain) >= 0.05:
            xs.append(cand)
    xs = np.array(xs)
    ang = rng.uniform(0, 2 * np.pi, 20)
    ys = geometry.wrap(xs + 1e-4 * np.stack([np.cos(ang), np.sin(ang)], axis=-1))
    indices = shadowing.expansivity_batch(slow_sys, slow_sp, xs, ys, 25)
    expansive_ok = all(v is not None for v in indices)

    ds = np.linspace(1e-3, slow_sp.r0, 200)
    qs = scales.chart_radius(slow_sp, ds)
    mono_ok = bool(np.all(np.diff(qs) >= 0) and qs[0] < qs[-1] / 10)

    _report(
        "criterion-9 boundary degeneration",
        growth_ok and shadow_ok and expansive_ok and mono_ok,
        f"fitted growth constants ({rep.boundary_growth_u['fitted_constant']:.3f}, "
        f"{rep.boundary_growth_s['fitted_constant']:.3f}) > 1; "
        f"{n_orbit} shadow certificates (worst d/(Q/50) = {worst_ratio:.2e}); "
        f"expansivity {sum(v is not None for v in indices)}/20; chart radius monotone",
    )
