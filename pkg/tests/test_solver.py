import numpy as np
import pytest

from roadparallax import (
    CameraIntrinsics,
    FlowField,
    GridMismatch,
    Image,
    PatchTooLarge,
    PlaneParams,
    RigidMotion,
    ScalarMap,
    block_match_flow,
    residual_flow_at,
    residual_flow_map,
    rotation_xyz,
    solve_gamma_at,
    solve_gamma_map,
    solve_gamma_tz0,
    warp_by_homography,
)

K0 = CameraIntrinsics(fx=220.0, fy=220.0, cx=160.0, cy=96.0, width=320, height=192)
PLANE0 = PlaneParams(np.array([0.0, 1.0, 0.0]), 1.5)
MOTION0 = RigidMotion(rotation_xyz(0.004, -0.006, 0.002), np.array([0.05, 0.01, -0.8]))


def test_solve_gamma_at_inverts_flow():
    rng = np.random.default_rng(0)
    for _ in range(300):
        p = np.array(
            [rng.uniform(0, K0.width - 1), rng.uniform(0, K0.height - 1)]
        )
        gamma = rng.uniform(-0.05, 0.3)
        u = residual_flow_at(p, gamma, MOTION0, PLANE0, K0)
        got = solve_gamma_at(p, u, MOTION0, PLANE0, K0)
        assert abs(got - gamma) < 1e-12


def test_solve_gamma_tz0_inverts_lateral_flow():
    lateral = RigidMotion(rotation_xyz(0.01, 0.0, -0.01), np.array([0.4, -0.15, 0.0]))
    rng = np.random.default_rng(1)
    for _ in range(100):
        p = np.array([rng.uniform(0, 319), rng.uniform(0, 191)])
        gamma = rng.uniform(-0.05, 0.3)
        u = residual_flow_at(p, gamma, lateral, PLANE0, K0)
        assert abs(solve_gamma_tz0(u, lateral, PLANE0, K0) - gamma) < 1e-12


def test_solve_gamma_map_roundtrip_general():
    rng = np.random.default_rng(2)
    K = CameraIntrinsics(fx=150.0, fy=150.0, cx=32.0, cy=20.0, width=64, height=40)
    g = ScalarMap(rng.uniform(-0.05, 0.3, (40, 64)))
    flow = residual_flow_map(g, MOTION0, PLANE0, K)
    got, report = solve_gamma_map(flow, MOTION0, PLANE0, K)
    assert report.mode == "general"
    assert report.total == 40 * 64
    assert report.solved + report.near_epipole + report.singular == report.input_valid
    assert got.valid.sum() == report.solved
    err = np.abs(got.values[got.valid] - g.values[got.valid])
    assert err.max() < 1e-10


def test_solve_gamma_map_excludes_epipole_disk():
    # epipole lands on the grid at (19, 19) for this setup
    K = CameraIntrinsics(fx=50.0, fy=50.0, cx=20.0, cy=20.0, width=41, height=41)
    motion = RigidMotion(np.eye(3), np.array([0.01, 0.01, -0.5]))
    g = ScalarMap(np.full((41, 41), 0.1))
    flow = residual_flow_map(g, motion, PLANE0, K)
    got, report = solve_gamma_map(flow, motion, PLANE0, K)
    assert report.near_epipole == 13  # pixels within 2 px of the epipole
    assert not got.valid[19, 19]
    assert not got.valid[18, 19] and not got.valid[21, 19]
    assert got.valid[19, 16]


def test_solve_gamma_map_lateral_mode():
    lateral = RigidMotion(np.eye(3), np.array([0.3, -0.1, 0.0]))
    rng = np.random.default_rng(3)
    K = CameraIntrinsics(fx=100.0, fy=100.0, cx=24.0, cy=16.0, width=48, height=32)
    g = ScalarMap(rng.uniform(-0.05, 0.3, (32, 48)))
    flow = residual_flow_map(g, lateral, PLANE0, K)
    got, report = solve_gamma_map(flow, lateral, PLANE0, K)
    assert report.mode == "lateral"
    assert report.solved == report.input_valid
    assert np.max(np.abs(got.values[got.valid] - g.values[got.valid])) < 1e-12


def test_solve_gamma_map_degenerate_motion():
    still = RigidMotion(rotation_xyz(0.01, -0.02, 0.0), np.zeros(3))
    K = CameraIntrinsics(fx=100.0, fy=100.0, cx=16.0, cy=12.0, width=32, height=24)
    flow = FlowField(np.zeros((24, 32, 2)))
    got, report = solve_gamma_map(flow, still, PLANE0, K)
    assert report.mode == "degenerate"
    assert report.solved == 0
    assert not got.valid.any()


def test_solve_gamma_map_propagates_input_mask():
    K = CameraIntrinsics(fx=100.0, fy=100.0, cx=16.0, cy=12.0, width=32, height=24)
    valid = np.ones((24, 32), dtype=bool)
    valid[:5] = False
    g = ScalarMap(np.full((24, 32), 0.1), valid)
    flow = residual_flow_map(g, MOTION0, PLANE0, K)
    got, report = solve_gamma_map(flow, MOTION0, PLANE0, K)
    assert report.input_valid == valid.sum()
    assert not got.valid[:5].any()


def test_solve_gamma_map_grid_mismatch():
    flow = FlowField(np.zeros((10, 10, 2)))
    with pytest.raises(GridMismatch):
        solve_gamma_map(flow, MOTION0, PLANE0, K0)


def test_block_match_patch_too_large():
    img = Image(np.full((20, 20, 1), 0.5))
    with pytest.raises(PatchTooLarge):
        block_match_flow(img, img, patch=9, radius=8)
    with pytest.raises(ValueError):
        block_match_flow(img, img, patch=4, radius=2)  # even patch


def test_block_match_on_rendered_pair(gt):
    warped, wok = warp_by_homography(gt.source.image, gt.homography)
    flow = block_match_flow(warped, gt.target.image, source_mask=wok)
    both = flow.valid & gt.flow_res.valid
    assert both.sum() > 5000
    epe = np.linalg.norm(
        flow.values[both] - gt.flow_res.values[both], axis=-1
    )
    assert np.median(epe) < 0.5
