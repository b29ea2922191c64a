import numpy as np
import pytest

from pwhyp import geometry, graphs, scales, splitting, systems
from pwhyp.errors import (
    TargetTooFar,
    GraphFoldover,
    OutputNotAdmissible,
    IdenticalInputs,
)

from oracles import eigen_data, linear_graph_image

LAM_S, LAM_U, E_S, E_U = eigen_data(systems.CAT_MATRIX)


@pytest.fixture(scope="module")
def cat_chart(cat, cat_scales):
    x = np.array([0.3, 0.4])
    y = cat.forward(x)
    return graphs.local_map(cat, cat_scales, x, y)


def test_local_map_cat_blocks_exact(cat_chart):
    assert cat_chart.d_uu == pytest.approx(LAM_U, abs=1e-12)
    assert cat_chart.d_ss == pytest.approx(LAM_S, abs=1e-12)
    assert abs(cat_chart.d_us) < 1e-12
    assert abs(cat_chart.d_su) < 1e-12
    assert np.max(np.abs(cat_chart.offset)) < 1e-12


def test_local_map_cat_remainder_vanishes(cat_chart, rng):
    v = rng.uniform(-cat_chart.q_x, cat_chart.q_x, size=(50, 2))
    assert np.max(np.abs(cat_chart.remainder(v))) < 1e-12


def test_local_map_displaced_target_shifts_offset_only(cat, cat_scales):
    x = np.array([0.3, 0.4])
    y = geometry.exp_map(cat.forward(x), np.array([1e-9, 0.0]))
    lm = graphs.local_map(cat, cat_scales, x, y)
    assert lm.d_uu == pytest.approx(LAM_U, abs=1e-10)
    assert abs(lm.d_us) < 1e-10
    assert np.linalg.norm(lm.offset) == pytest.approx(1e-9, rel=1e-3)
    v = np.array([[2e-3, -1e-3]])
    assert np.max(np.abs(lm.remainder(v))) < 1e-12


def test_local_map_rejects_far_target(cat, cat_scales):
    x = np.array([0.3, 0.4])
    y = geometry.exp_map(cat.forward(x), np.array([0.05, 0.0]))
    with pytest.raises(TargetTooFar):
        graphs.local_map(cat, cat_scales, x, y)


def test_block_estimates_cat(cat_chart, cat_scales):
    rep = graphs.block_estimates(cat_chart, cat_scales)
    assert rep["passed"]
    # all block deviations are zero, so every slack equals the full budget
    assert rep["slacks"]["off_us"] == pytest.approx(0.045, abs=1e-12)
    assert rep["worst_slack"] == pytest.approx(0.045, abs=1e-9)


def test_block_estimates_slowdown_along_orbit(slow, slow_scales, rng):
    count = 0
    while count < 8:
        x = rng.random(2)
        if geometry.boundary_dist(x, slow.domain) < 0.02:
            continue
        count += 1
        y = slow.forward(x)
        lm = graphs.local_map(slow, slow_scales, np.asarray(x), y)
        rep = graphs.block_estimates(lm, slow_scales)
        assert rep["passed"], (x, rep)


def test_admissibility_zero_graph(cat, cat_scales):
    spl = splitting.compute_splitting(cat, np.array([0.2, 0.2]))
    q = float(scales.chart_radius(cat_scales, 1.0))
    w = graphs.zero_manifold(np.array([0.2, 0.2]), "u", q, spl)
    ok, det = graphs.admissibility_check(w, cat_scales)
    assert ok
    assert det["center"] == 0.0 and det["slope"] == 0.0


def test_admissibility_center_violation(cat, cat_scales):
    spl = splitting.compute_splitting(cat, np.array([0.2, 0.2]))
    q = float(scales.chart_radius(cat_scales, 1.0))
    w = graphs.make_manifold(np.array([0.2, 0.2]), "u", q, spl, lambda v: 2e-3 * q + 0 * v)
    ok, det = graphs.admissibility_check(w, cat_scales)
    assert not ok and det["tightest"] == "center"


def test_transform_zero_graph_stays_zero(cat, cat_scales, cat_chart):
    w = graphs.zero_manifold(cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x)
    out = graphs.graph_transform_u(cat_chart, w, cat_scales)
    assert np.max(np.abs(out.phi)) < 1e-12
    assert out.radius == pytest.approx(cat_chart.q_y)


def test_transform_linear_slope_map(cat, cat_scales, cat_chart):
    # slope image s -> (d_su + d_ss s)/(d_uu + d_us s) = s * lam_s / lam_u
    for s in (0.01, -0.02, 0.3):
        w = graphs.make_manifold(
            cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x, lambda v: s * v
        )
        out = graphs.graph_transform_u(cat_chart, w, cat_scales)
        expected_slope = graphs.linear_graph_slope_image(cat_chart, s)
        assert expected_slope == pytest.approx(s * LAM_S / LAM_U, abs=1e-12)
        fitted = np.polyfit(out.grid(), out.phi, 1)
        assert fitted[0] == pytest.approx(expected_slope, abs=1e-12)
        assert abs(fitted[1]) < 1e-13
        assert np.max(np.abs(out.dphi - expected_slope)) < 1e-11


def test_transform_matches_affine_oracle_with_offset(cat, cat_scales):
    # displaced target: the image graph follows the affine closed form
    x = np.array([0.17, 0.62])
    spl_x = splitting.compute_splitting(cat, x)
    y = geometry.exp_map(cat.forward(x), 5e-10 * spl_x.e_u)
    lm = graphs.local_map(cat, cat_scales, x, y)
    s, t = 0.05, 2e-7
    w = graphs.make_manifold(x, "u", lm.q_x, lm.frame_x, lambda v: s * v + t)
    out = graphs.graph_transform_u(lm, w, cat_scales)
    B = np.array([[lm.d_uu, lm.d_us], [lm.d_su, lm.d_ss]])
    slope_o, inter_o = linear_graph_image(B, lm.offset, s, t)
    fitted = np.polyfit(out.grid(), out.phi, 1)
    assert fitted[0] == pytest.approx(slope_o, abs=1e-12)
    assert fitted[1] == pytest.approx(inter_o, abs=1e-13)


def test_transform_contraction_of_constants(cat, cat_scales, cat_chart):
    # transform of phi=c has sup difference lam_s * c against phi=0
    c = 1e-5
    w0 = graphs.zero_manifold(cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x)
    wc = graphs.make_manifold(
        cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x, lambda v: c + 0 * v
    )
    factor = graphs.contraction_factor(cat_chart, w0, wc, cat_scales)
    assert factor == pytest.approx(LAM_S, abs=1e-10)
    assert factor <= np.sqrt(LAM_S) + 2 * w0.spacing
    # independence of the constant
    factor2 = graphs.contraction_factor(
        cat_chart,
        w0,
        graphs.make_manifold(
            cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x, lambda v: 0.3 * c + 0 * v
        ),
        cat_scales,
    )
    assert factor2 == pytest.approx(factor, abs=1e-10)


def test_contraction_random_pairs_cat(cat, cat_scales, cat_chart, rng):
    bound = np.sqrt(float(cat_chart.frame_x.n_s)) + 2 * (2 * cat_chart.q_x / (graphs.N_GRID - 1))
    for _ in range(25):
        w1 = graphs.random_admissible_manifold(
            rng, cat_scales, cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x
        )
        w2 = graphs.random_admissible_manifold(
            rng, cat_scales, cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x
        )
        factor = graphs.contraction_factor(cat_chart, w1, w2, cat_scales)
        assert factor <= bound


def test_contraction_identical_inputs_rejected(cat, cat_scales, cat_chart):
    w = graphs.zero_manifold(cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x)
    with pytest.raises(IdenticalInputs):
        graphs.contraction_factor(cat_chart, w, w, cat_scales)


def test_transform_output_admissible_random_inputs(cat, cat_scales, cat_chart, rng):
    for _ in range(30):
        w = graphs.random_admissible_manifold(
            rng, cat_scales, cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x
        )
        out = graphs.graph_transform_u(cat_chart, w, cat_scales)
        ok, _ = graphs.admissibility_check(out, cat_scales)
        assert ok


def test_transform_image_lies_on_mapped_graph(cat, cat_scales, cat_chart, rng):
    # points of the output graph are images of input-graph points
    w = graphs.random_admissible_manifold(
        rng, cat_scales, cat_chart.x, "u", cat_chart.q_x, cat_chart.frame_x
    )
    out = graphs.graph_transform_u(cat_chart, w, cat_scales)
    interp = w.interpolant()
    R_x = cat_chart.frame_x.frame()
    R_y = cat_chart.frame_y.frame()
    for v_out in np.linspace(-out.radius, out.radius, 7):
        phi_out = out.interpolant()(v_out)
        target = geometry.exp_map(cat_chart.y, R_y @ np.array([v_out, float(phi_out)]))
        # solve for the input-graph point mapping to this u-coordinate
        vg = w.grid()
        img = cat_chart.push(np.stack([vg, w.phi], axis=-1))
        i = np.argmin(np.abs(img[:, 0] - v_out))
        src = geometry.exp_map(cat_chart.x, R_x @ np.array([vg[i], w.phi[i]]))
        assert geometry.torus_dist(cat.forward(src), target) < 1e-9 + 2 * np.abs(
            img[i, 0] - v_out
        )


def test_stable_transform_mirror(cat, cat_scales):
    # stable graphs contract under the backward chart with rate 1/lam_u
    x = np.array([0.3, 0.4])
    y = cat.forward(x)
    spl_x = splitting.compute_splitting(cat, x)
    spl_y = splitting.compute_splitting(cat, y)
    lm_back = graphs.local_map_backward(cat, cat_scales, np.asarray(x), np.asarray(y),
                                        splitting_x=spl_x, splitting_y=spl_y)
    q_y = lm_back.q_x  # domain of the backward chart sits at y
    w = graphs.make_manifold(y, "s", q_y, spl_y.swapped(), lambda v: 0.01 * v)
    out = graphs.graph_transform_s(lm_back, w, cat_scales)
    assert out.kind == "s"
    fitted = np.polyfit(out.grid(), out.phi, 1)
    assert fitted[0] == pytest.approx(0.01 * LAM_S / LAM_U, abs=1e-12)


def test_transform_slowdown_orbit_step(slow, slow_scales, rng):
    # transform along a true orbit step near the slow zone stays admissible
    x = np.array([0.12, 0.05])
    y = slow.forward(x)
    lm = graphs.local_map(slow, slow_scales, x, y)
    w = graphs.random_admissible_manifold(rng, slow_scales, x, "u", lm.q_x, lm.frame_x)
    out = graphs.graph_transform_u(lm, w, slow_scales)
    ok, _ = graphs.admissibility_check(out, slow_scales)
    assert ok
    factor = graphs.contraction_factor(
        lm,
        w,
        graphs.random_admissible_manifold(rng, slow_scales, x, "u", lm.q_x, lm.frame_x),
        slow_scales,
    )
    assert factor <= np.sqrt(float(lm.frame_x.n_s)) + 1e-5
