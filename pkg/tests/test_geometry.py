import numpy as np
import pytest

from pwhyp import geometry
from pwhyp.errors import NormExceedsInjectivityRadius, PointsTooFar, PointOnBoundary

from oracles import brute_torus_dist


def test_torus_dist_identity():
    assert geometry.torus_dist((0.1, 0.1), (0.1, 0.1)) == 0.0


def test_torus_dist_wraparound():
    assert geometry.torus_dist((0.0, 0.0), (0.9, 0.0)) == pytest.approx(0.1, abs=1e-15)


def test_torus_dist_against_brute_force():
    # the corner point is the diameter case
    assert geometry.torus_dist((0.0, 0.0), (0.5, 0.5)) == pytest.approx(
        0.7071067811865476, abs=1e-15
    )
    rng = np.random.default_rng(7)
    for _ in range(200):
        p, q = rng.random(2), rng.random(2)
        assert geometry.torus_dist(p, q) == pytest.approx(
            brute_torus_dist(p, q), abs=1e-14
        )


def test_torus_dist_symmetry_and_triangle():
    rng = np.random.default_rng(11)
    p, q, r = rng.random((3, 50, 2))
    dpq = geometry.torus_dist(p, q)
    assert np.allclose(dpq, geometry.torus_dist(q, p))
    assert np.all(dpq <= geometry.torus_dist(p, r) + geometry.torus_dist(r, q) + 1e-14)


def test_exp_map_zero_vector():
    assert np.allclose(geometry.exp_map((0.2, 0.3), (0.0, 0.0)), (0.2, 0.3))


def test_exp_map_wraps():
    assert np.allclose(geometry.exp_map((0.9, 0.0), (0.2, 0.0)), (0.1, 0.0))


def test_exp_map_rejects_long_vectors():
    with pytest.raises(NormExceedsInjectivityRadius):
        geometry.exp_map((0.25, 0.25), (0.3, 0.4))  # norm exactly 0.5


def test_exp_map_is_isometric_along_radii():
    rng = np.random.default_rng(3)
    for _ in range(300):
        x = rng.random(2)
        w = rng.uniform(-0.35, 0.35, size=2)
        assert geometry.torus_dist(geometry.exp_map(x, w), x) == pytest.approx(
            np.linalg.norm(w), abs=1e-15
        )


def test_log_map_examples():
    assert np.allclose(geometry.log_map((0.2, 0.3), (0.2, 0.3)), 0.0)
    assert np.allclose(geometry.log_map((0.95, 0.5), (0.05, 0.5)), (0.1, 0.0))


def test_log_map_rejects_far_points():
    with pytest.raises(PointsTooFar):
        geometry.log_map((0.0, 0.0), (0.5, 0.5))


def test_exp_log_round_trip():
    rng = np.random.default_rng(5)
    count = 0
    while count < 1000:
        x, y = rng.random(2), rng.random(2)
        if geometry.torus_dist(x, y) >= 0.49:
            continue
        count += 1
        w = geometry.log_map(x, y)
        assert geometry.torus_dist(geometry.exp_map(x, w), y) < 1e-15
        assert np.linalg.norm(w) == pytest.approx(geometry.torus_dist(x, y), abs=1e-15)


def test_boundary_dist_full_manifold():
    dom = geometry.full_manifold()
    assert geometry.boundary_dist((0.3, 0.7), dom) == 1.0


def test_boundary_dist_single_excluded_point():
    dom = geometry.complement_of([(0.0, 0.0)])
    assert geometry.boundary_dist((0.1, 0.0), dom) == pytest.approx(0.1, abs=1e-15)


def test_boundary_dist_min_over_excluded_points():
    dom = geometry.complement_of([(0.0, 0.0), (0.5, 0.5)])
    assert geometry.boundary_dist((0.4, 0.5), dom) == pytest.approx(0.1, abs=1e-12)


def test_boundary_dist_raises_on_excluded_point():
    dom = geometry.complement_of([(0.25, 0.25)])
    with pytest.raises(PointOnBoundary):
        geometry.boundary_dist((0.25, 0.25), dom)


def test_boundary_dist_is_1_lipschitz():
    dom = geometry.complement_of([(0.0, 0.0), (0.37, 0.61)])
    rng = np.random.default_rng(9)
    x = rng.random((500, 2))
    y = rng.random((500, 2))
    dx = geometry.boundary_dist(x, dom)
    dy = geometry.boundary_dist(y, dom)
    assert np.all(np.abs(dx - dy) <= geometry.torus_dist(x, y) + 1e-12)


def test_wrap_idempotent():
    p = np.array([1.25, -0.75])
    assert np.allclose(geometry.wrap(p), (0.25, 0.25))
    assert np.allclose(geometry.wrap(geometry.wrap(p)), geometry.wrap(p))
