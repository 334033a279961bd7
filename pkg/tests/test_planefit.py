import numpy as np
import pytest

from roadparallax import (
    DegenerateInput,
    NoConsensus,
    PlaneParams,
    PointCloud,
    RansacConfig,
    plane_distances,
    ransac_plane,
    refine_plane,
)


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def _plane_points(rng, normal, hc, n, sigma=0.0):
    x = rng.uniform(-10, 10, n)
    z = rng.uniform(2, 30, n)
    y = (hc - normal[0] * x - normal[2] * z) / normal[1]
    pts = np.stack([x, y, z], axis=1)
    if sigma > 0:
        pts = pts + normal[None, :] * rng.normal(0.0, sigma, n)[:, None]
    return pts


def test_plane_distances_hand_case():
    plane = PlaneParams(np.array([0.0, 1.0, 0.0]), 1.5)
    pts = np.array([[3.0, 1.5, 9.0], [0.0, 1.0, 4.0], [0.0, 2.25, 4.0]])
    assert np.array_equal(plane_distances(plane, pts), np.array([0.0, 0.5, 0.75]))


def test_refine_plane_exact():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = _unit([rng.uniform(-0.3, 0.3), 1.0, rng.uniform(-0.3, 0.3)])
        hc = rng.uniform(1.0, 2.0)
        plane = refine_plane(_plane_points(rng, n, hc, 200))
        assert abs(abs(plane.normal @ n) - 1.0) < 1e-12
        assert abs(plane.height - hc) < 1e-10
        assert plane.height > 0  # orientation fixed regardless of sample order


def test_refine_plane_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        refine_plane(np.zeros((2, 3)))
    collinear = np.outer(np.arange(10.0), np.array([1.0, 2.0, 3.0]))
    with pytest.raises(DegenerateInput):
        refine_plane(collinear)


def test_ransac_noiseless_with_outliers_is_exact():
    rng = np.random.default_rng(1)
    n = _unit([0.03, 1.0, -0.02])
    hc = 1.43
    good = _plane_points(rng, n, hc, 600)
    junk = np.stack(
        [rng.uniform(-10, 10, 400), rng.uniform(-4, 4, 400), rng.uniform(2, 30, 400)],
        axis=1,
    )
    junk = junk[np.abs(junk @ n - hc) > 0.2]
    plane, inl = ransac_plane(PointCloud(np.vstack([good, junk])), RansacConfig(seed=3))
    assert abs(abs(plane.normal @ n) - 1.0) < 1e-12
    assert abs(plane.height - hc) < 1e-10
    assert inl[:600].all()
    assert not inl[600:].any()


def test_ransac_labels_restrict_candidates():
    rng = np.random.default_rng(2)
    n = _unit([0.0, 1.0, 0.0])
    road = _plane_points(rng, n, 1.5, 300)
    # a denser competing plane that only wins if labels are ignored
    wall = np.stack(
        [np.full(900, 2.0), rng.uniform(-3, 3, 900), rng.uniform(2, 30, 900)], axis=1
    )
    pts = np.vstack([road, wall])
    labels = np.zeros(1200, dtype=bool)
    labels[:300] = True
    plane, inl = ransac_plane(PointCloud(pts, labels), RansacConfig(seed=0))
    assert abs(abs(plane.normal @ n) - 1.0) < 1e-9
    assert not inl[300:].any()
    plane2, _ = ransac_plane(PointCloud(pts), RansacConfig(seed=0))
    assert abs(plane2.normal @ np.array([1.0, 0.0, 0.0])) > 0.99


def test_ransac_deterministic():
    rng = np.random.default_rng(4)
    pts = _plane_points(rng, _unit([0.05, 1.0, 0.01]), 1.6, 500, sigma=0.01)
    cloud = PointCloud(pts)
    p1, m1 = ransac_plane(cloud, RansacConfig(seed=11))
    p2, m2 = ransac_plane(cloud, RansacConfig(seed=11))
    assert np.array_equal(p1.normal, p2.normal)
    assert p1.height == p2.height
    assert np.array_equal(m1, m2)


def test_ransac_no_consensus():
    rng = np.random.default_rng(5)
    scatter = rng.uniform(-10, 10, (200, 3)) + np.array([0.0, 5.0, 15.0])
    with pytest.raises(NoConsensus):
        ransac_plane(PointCloud(scatter), RansacConfig(threshold=1e-6, min_inliers=50))


def test_ransac_needs_three_candidates():
    with pytest.raises(DegenerateInput):
        ransac_plane(PointCloud(np.array([[0.0, 1.0, 2.0], [1.0, 1.0, 2.0]])))
    pts = np.array([[0.0, 1.0, 2.0], [1.0, 1.0, 2.0], [0.0, 1.0, 3.0], [5.0, 0.0, 1.0]])
    labels = np.array([True, True, False, False])
    with pytest.raises(DegenerateInput):
        ransac_plane(PointCloud(pts, labels))


def test_point_cloud_validation():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        PointCloud(np.full((3, 3), np.inf))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 3)), np.array([True, False]))
    with pytest.raises(ValueError):
        RansacConfig(iterations=0)
    with pytest.raises(ValueError):
        RansacConfig(min_inliers=2)
