import numpy as np
import pytest

from roadparallax import (
    EmptyMask,
    EnergyWeights,
    FlowField,
    GridMismatch,
    Image,
    ScalarMap,
    photometric_energy,
    smoothness_energy,
    sparse_gamma_energy,
    ssim_map,
    total_energy,
)


def test_ssim_identity_is_exactly_one():
    rng = np.random.default_rng(0)
    im = Image(rng.random((15, 21, 3)))
    s = ssim_map(im, im)
    assert np.array_equal(s, np.ones((15, 21)))


def test_ssim_constant_pair_closed_form():
    a = Image(np.full((8, 8, 1), 0.2))
    b = Image(np.full((8, 8, 1), 0.8))
    s = ssim_map(a, b)
    # zero variance: SSIM = (2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1)
    want = (2.0 * 0.2 * 0.8 + 1e-4) / (0.2**2 + 0.8**2 + 1e-4)
    assert np.max(np.abs(s - want)) < 1e-12
    assert abs(want - 0.4706660785178650) < 1e-15


def test_ssim_bounded_and_symmetric():
    rng = np.random.default_rng(1)
    a = Image(rng.random((12, 12, 1)))
    b = Image(rng.random((12, 12, 1)))
    s1 = ssim_map(a, b)
    s2 = ssim_map(b, a)
    assert np.array_equal(s1, s2)
    assert s1.min() >= -1.0 - 1e-12 and s1.max() <= 1.0 + 1e-12


def test_photometric_energy_zero_on_identical():
    rng = np.random.default_rng(2)
    im = Image(rng.random((10, 10, 3)))
    mask = np.ones((10, 10), dtype=bool)
    assert photometric_energy(im, im, mask) == 0.0


def test_photometric_energy_composition():
    rng = np.random.default_rng(3)
    a = Image(rng.random((9, 9, 1)))
    b = Image(rng.random((9, 9, 1)))
    mask = rng.random((9, 9)) > 0.3
    alpha = 0.6
    got = photometric_energy(a, b, mask, alpha)
    ssim = ssim_map(a, b)
    l1 = np.abs(a.data - b.data).mean(axis=2)
    want = (alpha * (1.0 - ssim) / 2.0 + (1.0 - alpha) * l1)[mask].mean()
    assert abs(got - want) < 1e-15


def test_photometric_energy_errors():
    im = Image(np.zeros((5, 5, 1)))
    with pytest.raises(EmptyMask):
        photometric_energy(im, im, np.zeros((5, 5), dtype=bool))
    with pytest.raises(ValueError):
        photometric_energy(im, im, np.ones((5, 5), dtype=bool), alpha=1.5)
    with pytest.raises(GridMismatch):
        photometric_energy(im, Image(np.zeros((5, 6, 1))), np.ones((5, 5), bool))


def test_sparse_energy_is_a_sum():
    pred = ScalarMap(np.array([[0.1, 0.2], [0.3, 0.4]]))
    ref_vals = np.array([[0.2, 0.2], [0.3, 0.1]])
    ref_ok = np.array([[True, True], [False, True]])
    ref = ScalarMap(ref_vals, ref_ok)
    got = sparse_gamma_energy(pred, ref)
    assert abs(got - (0.1 + 0.0 + 0.3)) < 1e-15
    none = ScalarMap(ref_vals, np.zeros((2, 2), dtype=bool))
    assert sparse_gamma_energy(pred, none) == 0.0


def test_smoothness_zero_for_affine_flow():
    # dyadic coefficients make the second differences bitwise zero
    H, W = 14, 18
    xs, ys = np.meshgrid(np.arange(W, dtype=float), np.arange(H, dtype=float))
    u = np.stack([0.375 + 0.25 * xs - 1.5 * ys, -2.0 + 0.5 * xs + 0.125 * ys], axis=-1)
    ref = Image(np.full((H, W, 1), 0.5))
    assert smoothness_energy(FlowField(u), ref) == 0.0


def test_smoothness_quadratic_probe():
    # u_x = x^2 has second difference 2 along x, zero along y: 4 per cell
    H, W = 20, 30
    xs, _ = np.meshgrid(np.arange(W, dtype=float), np.arange(H, dtype=float))
    u = np.stack([xs * xs, np.zeros((H, W))], axis=-1)
    ref = Image(np.full((H, W, 1), 0.5))
    got = smoothness_energy(FlowField(u), ref)
    assert got == 4.0 * (H - 2) * (W - 2)


def test_smoothness_edge_weighting_monotone():
    rng = np.random.default_rng(4)
    H, W = 12, 16
    u = rng.normal(0, 1, (H, W, 2))
    flow = FlowField(u)
    flat = Image(np.full((H, W, 1), 0.5))
    ramp = Image((np.linspace(0, 1, W)[None, :] * np.ones((H, 1)))[:, :, None])
    e_flat = smoothness_energy(flow, flat, beta=2.0)
    e_ramp = smoothness_energy(flow, ramp, beta=2.0)
    assert e_ramp < e_flat  # image gradients damp the penalty
    assert smoothness_energy(flow, ramp, beta=0.0) == smoothness_energy(
        flow, flat, beta=0.0
    )


def test_smoothness_skips_invalid_stencils():
    H, W = 8, 8
    xs, _ = np.meshgrid(np.arange(W, dtype=float), np.arange(H, dtype=float))
    u = np.stack([xs * xs, np.zeros((H, W))], axis=-1)
    ok = np.ones((H, W), dtype=bool)
    ok[4, 4] = False  # kills 3 horizontal + 3 vertical stencils
    ref = Image(np.full((H, W, 1), 0.5))
    got = smoothness_energy(FlowField(u, ok), ref)
    assert got == 4.0 * ((H - 2) * (W - 2) - 3)


def test_smoothness_tiny_grids_are_zero():
    ref = Image(np.full((2, 5, 1), 0.5))
    assert smoothness_energy(FlowField(np.ones((2, 5, 2))), ref) == 0.0


def test_total_energy_composition():
    rng = np.random.default_rng(5)
    H, W = 10, 12
    target = Image(rng.random((H, W, 3)))
    cand = Image(rng.random((H, W, 3)))
    mask = np.ones((H, W), dtype=bool)
    pred = ScalarMap(rng.uniform(0, 0.2, (H, W)))
    ref = ScalarMap(rng.uniform(0, 0.2, (H, W)), rng.random((H, W)) > 0.8)
    flow = FlowField(rng.normal(0, 1, (H, W, 2)))
    weights = EnergyWeights(alpha=0.7, beta=0.5, lambda_p=2.0, lambda_s=0.25, lambda_sm=0.05)
    br = total_energy(target, cand, mask, pred, ref, flow, weights)
    assert br.photometric == photometric_energy(target, cand, mask, 0.7)
    assert br.sparse == sparse_gamma_energy(pred, ref)
    assert br.smoothness == smoothness_energy(flow, target, 0.5)
    want = 2.0 * br.photometric + 0.25 * br.sparse + 0.05 * br.smoothness
    assert abs(br.total - want) < 1e-15
    assert br.as_dict()["total"] == br.total


def test_energy_weights_validation():
    with pytest.raises(ValueError):
        EnergyWeights(alpha=-0.1)
    with pytest.raises(ValueError):
        EnergyWeights(beta=-1.0)
    with pytest.raises(ValueError):
        EnergyWeights(lambda_p=-0.5)
