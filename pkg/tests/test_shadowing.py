import numpy as np
import pytest

from pwhyp import geometry, graphs, scales, shadowing, splitting, systems
from pwhyp.errors import OrbitLeavesDomain

from oracles import eigen_data, banded_linear_shadow

LAM_S, LAM_U, E_S, E_U = eigen_data(systems.CAT_MATRIX)

Q_CAT = 0.3**2.5 * 0.25**1.1
DELTA_U_CAT = 0.0225
STEP_BOUND_CAT = DELTA_U_CAT * Q_CAT**3


@pytest.fixture(scope="module")
def true_orbit(cat, cat_scales):
    return shadowing.make_noisy_orbit(cat, cat_scales, (0.3, 0.4), 20, 0.0, seed=1)


@pytest.fixture(scope="module")
def noisy_orbit(cat, cat_scales):
    return shadowing.make_noisy_orbit(cat, cat_scales, (0.3, 0.4), 40, 0.1, seed=7)


def test_true_orbit_is_valid_pseudo_orbit(cat, cat_scales, true_orbit):
    assert true_orbit.all_valid()
    assert true_orbit.products_ok()
    rep = shadowing.validate_pseudo_orbit(cat, cat_scales, true_orbit)
    assert rep.passed
    # gaps identically zero on the true orbit
    assert np.max(true_orbit.gaps_fwd) < 1e-15


def test_step_bound_magnitude_cat(noisy_orbit):
    # delta_u * Q^2 * Q(f x) at cat defaults = 0.0225 * Q^3 = 2.78e-8
    assert STEP_BOUND_CAT == pytest.approx(2.7787e-8, rel=1e-3)
    assert np.allclose(noisy_orbit.bounds_fwd, STEP_BOUND_CAT, rtol=1e-12)
    # kicks at 10% of the bound
    assert np.max(noisy_orbit.kicks) <= 0.1 * STEP_BOUND_CAT * (1 + 1e-12)
    assert np.max(noisy_orbit.kicks) > 0.05 * STEP_BOUND_CAT


def test_noisy_orbit_valid_and_validates(cat, cat_scales, noisy_orbit):
    assert noisy_orbit.all_valid()
    rep = shadowing.validate_pseudo_orbit(cat, cat_scales, noisy_orbit)
    assert rep.passed
    # backward-pass kicks get amplified by up to the derivative norm in
    # the forward gap, so the ratio cap is fraction * lam_u
    assert rep.worst_fwd_ratio <= 0.1 * LAM_U + 1e-9


def test_oversized_kicks_flagged_invalid(cat, cat_scales):
    po = shadowing.make_noisy_orbit(cat, cat_scales, (0.3, 0.4), 10, 50.0, seed=3)
    assert not po.all_valid()
    assert np.all(~po.validity[po.K - 3 : po.K + 3])


def test_corrupted_entry_detected(cat, cat_scales, noisy_orbit):
    window = noisy_orbit.window.copy()
    window[noisy_orbit.K + 2] = geometry.wrap(
        window[noisy_orbit.K + 2] + 10 * STEP_BOUND_CAT
    )
    rep = shadowing.validate_pseudo_orbit(cat, cat_scales, window)
    assert not rep.passed
    assert rep.first_invalid_step in (1, 2)


def test_relaxed_mode_bounds(cat, cat_scales):
    # relaxed validation uses the plain chart gap as the step bound, so a
    # window that badly violates the cubic strict bound can still be a valid
    # exploratory orbit
    po_loose = shadowing.make_noisy_orbit(
        cat, cat_scales, (0.3, 0.4), 20, 0.5, seed=2, mode="relaxed"
    )
    assert po_loose.all_valid()
    assert np.allclose(po_loose.bounds_fwd, DELTA_U_CAT, rtol=1e-12)
    strict_rep = shadowing.validate_pseudo_orbit(
        cat, cat_scales, po_loose.window, mode="strict"
    )
    assert not strict_rep.passed  # kicks at 0.5 * delta_u dwarf the cubic bound
    relaxed_rep = shadowing.validate_pseudo_orbit(
        cat, cat_scales, po_loose.window, mode="relaxed"
    )
    assert relaxed_rep.passed


def test_orbit_leaves_domain_raises(slow, slow_scales):
    with pytest.raises(OrbitLeavesDomain):
        shadowing.make_noisy_orbit(
            slow, slow_scales, (1e-4, 5e-5), 10, 0.0, seed=1, d_min=1e-3
        )


def test_unstable_manifold_true_orbit_is_flat(cat, cat_scales, true_orbit):
    w = shadowing.local_unstable_manifold(cat, cat_scales, true_orbit)
    assert np.max(np.abs(w.phi)) < 1e-10
    ok, _ = graphs.admissibility_check(w, cat_scales)
    assert ok


def test_stable_manifold_true_orbit_is_flat(cat, cat_scales, true_orbit):
    w = shadowing.local_stable_manifold(cat, cat_scales, true_orbit)
    assert w.kind == "s"
    assert np.max(np.abs(w.phi)) < 1e-10


def test_unstable_manifold_noisy_orbit(cat, cat_scales, noisy_orbit):
    w = shadowing.local_unstable_manifold(
        cat, cat_scales, noisy_orbit, verify_seed_independence=True
    )
    ok, _ = graphs.admissibility_check(w, cat_scales)
    assert ok
    # offsets at the scale of kick / (1 - lam_s)
    assert np.max(np.abs(w.phi)) < 1e-3 * Q_CAT
    assert np.max(np.abs(w.phi)) < 50 * 0.1 * STEP_BOUND_CAT


def test_seed_independence_contraction_rate(cat, cat_scales, noisy_orbit, rng):
    # two different admissible seeds at depth n land within the product bound
    depth = 20
    i0 = noisy_orbit.K - depth
    seed = graphs.random_admissible_manifold(
        rng, cat_scales, noisy_orbit.window[i0], "u",
        float(noisy_orbit.q[i0]), noisy_orbit.splittings[i0],
    )
    a = shadowing._compose_to_center(cat, cat_scales, noisy_orbit, depth)
    b = shadowing._compose_to_center(cat, cat_scales, noisy_orbit, depth, seed_manifold=seed)
    gap0 = seed.sup_diff(
        graphs.zero_manifold(
            noisy_orbit.window[i0], "u", float(noisy_orbit.q[i0]), noisy_orbit.splittings[i0]
        )
    )
    # contraction product = lam_s^(depth/2) = 0.381966^10 = 6.617e-5
    bound = LAM_S ** (depth / 2) * gap0
    assert LAM_S ** (depth / 2) == pytest.approx(6.6175e-5, rel=1e-3)
    assert a.sup_diff(b) <= bound * (1 + 1e-6)


def test_shadow_true_orbit_is_base_point(cat, cat_scales, true_orbit):
    cert = shadowing.shadow_point(cat, cat_scales, true_orbit)
    assert cert.passed
    assert geometry.torus_dist(cert.shadow, true_orbit.point(0)) < 1e-12
    assert cert.distance_to_x0 < 1e-12
    assert cert.containment_horizon == true_orbit.K


def test_shadow_noisy_orbit_certificate(cat, cat_scales, noisy_orbit):
    cert = shadowing.shadow_point(cat, cat_scales, noisy_orbit, verify_seed_independence=True)
    assert cert.passed
    assert cert.distance_to_x0 <= cert.q0 / 50
    # empirical scale ~ kick / (lam_u - 1)
    assert cert.distance_to_x0 < 5 * 0.1 * STEP_BOUND_CAT / (LAM_U - 1)
    assert cert.containment_horizon == noisy_orbit.K
    assert cert.fixed_point_residual < shadowing.TOL_FIXED_POINT


def test_shadow_unique_from_different_start(cat, cat_scales, noisy_orbit):
    c1 = shadowing.shadow_point(cat, cat_scales, noisy_orbit, v_start=0.0)
    c2 = shadowing.shadow_point(
        cat, cat_scales, noisy_orbit, v_start=0.5 * float(noisy_orbit.q[noisy_orbit.K])
    )
    assert geometry.torus_dist(c1.shadow, c2.shadow) < 1e-12


def test_shadow_matches_banded_solve_cat(cat, cat_scales, noisy_orbit):
    cert = shadowing.shadow_point(cat, cat_scales, noisy_orbit)
    via_banded = shadowing.linear_shadow_solve(cat, noisy_orbit)
    assert geometry.torus_dist(cert.shadow, via_banded) < 1e-12
    # and against the dense test oracle
    defects = geometry.shortest_rep(
        cat.forward(noisy_orbit.window[:-1]) - noisy_orbit.window[1:]
    )
    w0 = banded_linear_shadow(systems.CAT_MATRIX, noisy_orbit.K, defects)
    oracle_pt = geometry.wrap(noisy_orbit.point(0) + w0)
    assert geometry.torus_dist(cert.shadow, oracle_pt) < 1e-12


def test_shadow_distance_grows_with_kick_in_mean(cat, cat_scales):
    means = []
    for frac in (0.01, 0.1, 0.5):
        dists = []
        for seed in range(12):
            po = shadowing.make_noisy_orbit(cat, cat_scales, (0.3, 0.4), 25, frac, seed=seed)
            dists.append(shadowing.shadow_point(cat, cat_scales, po).distance_to_x0)
        means.append(np.mean(dists))
    assert means[0] < means[1] < means[2]


def test_shadow_slowdown_orbit(slow, slow_scales):
    po = shadowing.make_noisy_orbit(slow, slow_scales, (0.3, 0.55), 25, 0.1, seed=5)
    cert = shadowing.shadow_point(slow, slow_scales, po)
    assert cert.passed
    assert cert.distance_to_x0 <= cert.q0 / 50


def test_expansivity_identical_points(cat, cat_scales):
    v = shadowing.expansivity_test(cat, cat_scales, (0.3, 0.4), (0.3, 0.4), 40)
    assert not v.separated


def test_expansivity_unstable_push(cat, cat_scales):
    x = np.array([0.3, 0.4])
    y = geometry.wrap(x + 1e-3 * E_U)
    v = shadowing.expansivity_test(cat, cat_scales, x, y, 10)
    # 1e-3 * lam_u^n > Q at n = 3 (1.79e-2 > 1.07e-2), not at n = 2
    assert v.separated and v.index == 3


def test_expansivity_stable_push_separates_backward(cat, cat_scales):
    x = np.array([0.3, 0.4])
    y = geometry.wrap(x + 1e-3 * E_S)
    v = shadowing.expansivity_test(cat, cat_scales, x, y, 10)
    assert v.separated and v.index == -3


def test_expansivity_batch_matches_scalar(cat, cat_scales, rng):
    xs = rng.random((20, 2))
    angles = rng.uniform(0, 2 * np.pi, 20)
    ys = geometry.wrap(xs + 1e-3 * np.stack([np.cos(angles), np.sin(angles)], axis=-1))
    batch = shadowing.expansivity_batch(cat, cat_scales, xs, ys, 8)
    for i in range(20):
        v = shadowing.expansivity_test(cat, cat_scales, xs[i], ys[i], 8)
        assert batch[i] == v.index
        assert v.separated and abs(v.index) <= 6
