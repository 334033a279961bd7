"""Release gate: twelve numbered end-to-end checks.

Each test covers one shipping requirement and prints a single
``[PASS]``/``[FAIL]`` line with the measured margin next to its
tolerance, so a verbose run reads as a checklist.  Everything here goes
through public entry points only; tolerances are the contract, not
aspirations, so never loosen one to make a failure go away.
"""

import hashlib

import numpy as np

from roadparallax import (
    AttentionParams,
    CameraIntrinsics,
    FlowField,
    Image,
    PlaneParams,
    PointCloud,
    RansacConfig,
    RigidMotion,
    ScalarMap,
    apply_homography,
    bucket_mae,
    cross_attention_forward,
    default_params,
    default_scene,
    depth_from_gamma,
    depth_metrics,
    erode_mask,
    evaluate_pair,
    gamma_of,
    ground_truth,
    height_from_gamma,
    homography_displacement,
    homography_from_motion,
    masked_mae,
    photometric_energy,
    plane_distances,
    project,
    ransac_plane,
    reconstruct_target,
    residual_flow_map,
    rotation_xyz,
    smoothness_energy,
    solve_gamma_map,
    ssim_map,
    transform_plane,
    warp_by_homography,
)
from roadparallax.cli import main as cli_main


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def _check(tag: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
    assert ok, f"{tag}: {detail}"


def _random_setup(rng):
    w = int(rng.integers(64, 320))
    h = int(rng.integers(48, 200))
    K = CameraIntrinsics(
        fx=float(rng.uniform(120, 400)),
        fy=float(rng.uniform(120, 400)),
        cx=float(rng.uniform(0.3, 0.7) * w),
        cy=float(rng.uniform(0.3, 0.7) * h),
        width=w,
        height=h,
    )
    R = rotation_xyz(*rng.uniform(-0.05, 0.05, 3))
    T = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-1, 1)])
    n = _unit([rng.uniform(-0.2, 0.2), 1.0, rng.uniform(-0.2, 0.2)])
    return K, RigidMotion(R, T), PlaneParams(n, float(rng.uniform(1.0, 2.0)))


def test_c01_homography_maps_plane_pixels():
    # 50 random two-view setups, >= 20 plane pixels each: the plane
    # homography must land every pixel on its projected match.
    rng = np.random.default_rng(101)
    worst = 0.0
    configs = 0
    while configs < 50:
        K, motion, plane = _random_setup(rng)
        H = homography_from_motion(K, motion, plane)
        got = 0
        err = 0.0
        for _ in range(400):
            p_s = np.array(
                [rng.uniform(0, K.width - 1), rng.uniform(0, K.height - 1)]
            )
            ray = np.array([(p_s[0] - K.cx) / K.fx, (p_s[1] - K.cy) / K.fy, 1.0])
            den = plane.normal @ ray
            if den < 0.05:
                continue  # grazing ray, plane point too far out
            P_t = motion.transform((plane.height / den) * ray)
            if P_t[2] < 0.05:
                continue
            e = np.max(np.abs(apply_homography(H, p_s) - project(K, P_t)))
            err = max(err, float(e))
            got += 1
            if got == 20:
                break
        if got < 20:
            continue  # config mostly looks past the plane, draw another
        configs += 1
        worst = max(worst, err)
    _check(
        "C01 plane homography",
        worst < 1e-9,
        f"max pixel error {worst:.3e} over 50 configs x 20 points (tol 1e-9)",
    )


def test_c02_residual_flow_identity(scene, gt):
    K = scene.intrinsics
    flow = residual_flow_map(gt.gamma, scene.motion, scene.plane, K)
    joint = flow.valid & gt.flow_res.valid
    assert joint.sum() > 10000
    err_flow = float(np.abs(flow.values[joint] - gt.flow_res.values[joint]).max())

    # closure: optical flow, residual flow, and the planar displacement
    # of the matched source pixel cancel exactly
    xs, ys = K.grid()
    grid = np.stack([xs, ys], axis=-1)
    sel = gt.flow_opt.valid & gt.flow_res.valid
    p_src = grid[sel] + gt.flow_opt.values[sel]
    closure = (
        gt.flow_opt.values[sel]
        + gt.flow_res.values[sel]
        + homography_displacement(p_src, gt.homography)
    )
    err_dec = float(np.abs(closure).max())
    _check(
        "C02 residual flow",
        err_flow < 1e-9 and err_dec < 1e-9,
        f"flow-from-gamma err {err_flow:.3e}, decomposition closure {err_dec:.3e} "
        f"on {int(sel.sum())} cells (tol 1e-9)",
    )


def test_c03_gamma_inversion_round_trip():
    # solve(flow(gamma)) == gamma away from the epipole disc and the
    # singular cells, for 20 random fields spanning both signs
    K = CameraIntrinsics(fx=70.0, fy=70.0, cx=40.0, cy=30.0, width=80, height=60)
    motion = RigidMotion(
        rotation_xyz(0.002, -0.003, 0.001), np.array([0.01, 0.01, -0.5])
    )
    plane = PlaneParams(np.array([0.0, 1.0, 0.0]), 1.5)
    rng = np.random.default_rng(303)
    worst = 0.0
    solved = 0
    for _ in range(20):
        gamma = ScalarMap(rng.uniform(-0.05, 0.3, (K.height, K.width)))
        flow = residual_flow_map(gamma, motion, plane, K)
        got, report = solve_gamma_map(flow, motion, plane, K)
        assert report.near_epipole > 0  # the exclusion disc sits in-frame
        worst = max(
            worst, float(np.abs(got.values[got.valid] - gamma.values[got.valid]).max())
        )
        solved += int(got.valid.sum())
    _check(
        "C03 inversion round trip",
        worst < 1e-10,
        f"max |gamma error| {worst:.3e} over 20 fields, {solved} solved cells (tol 1e-10)",
    )


def test_c04_metric_recovery_from_gamma(scene, gt):
    plane_t = transform_plane(scene.plane, scene.motion)
    depth = depth_from_gamma(gt.gamma, plane_t, scene.intrinsics)
    height = height_from_gamma(gt.gamma, depth)
    jd = depth.valid & gt.depth.valid
    jh = height.valid & gt.height.valid
    assert jd.sum() > 10000 and jh.sum() > 10000
    err_z = float(np.abs(depth.values[jd] - gt.depth.values[jd]).max())
    err_h = float(np.abs(height.values[jh] - gt.height.values[jh]).max())
    back = gamma_of(height.values[jh], depth.values[jh])
    err_g = float(np.abs(back - gt.gamma.values[jh]).max())
    _check(
        "C04 metric recovery",
        err_z < 1e-6 and err_h < 1e-6 and err_g < 1e-12,
        f"depth err {err_z:.3e} m, height err {err_h:.3e} m (tol 1e-6); "
        f"gamma round trip {err_g:.3e} (tol 1e-12)",
    )


def test_c05_depth_ratio_identity():
    # Z_t / Z_s equals the third homography row applied to the source
    # pixel plus the parallax term, including off-plane points
    K = CameraIntrinsics(fx=220.0, fy=220.0, cx=160.0, cy=96.0, width=320, height=192)
    motion = RigidMotion(
        rotation_xyz(0.004, -0.006, 0.002), np.array([0.05, 0.01, -0.8])
    )
    plane = PlaneParams(np.array([0.0, 1.0, 0.0]), 1.5)
    H = homography_from_motion(K, motion, plane)
    rng = np.random.default_rng(505)
    worst = 0.0
    n = 0
    while n < 1000:
        P_s = np.array(
            [rng.uniform(-8, 8), rng.uniform(-3, 3), rng.uniform(2.0, 40.0)]
        )
        h = plane.height - plane.normal @ P_s
        if abs(h) < 1e-3:
            continue  # keep the sample genuinely off the plane
        P_t = motion.transform(P_s)
        if P_t[2] <= 0.1:
            continue
        Z_s = P_s[2]
        p_tilde = K.matrix() @ P_s / Z_s
        rhs = H.third_row @ p_tilde + h * motion.translation[2] / (plane.height * Z_s)
        worst = max(worst, abs(P_t[2] / Z_s - rhs))
        n += 1
    _check(
        "C05 depth ratio identity",
        worst < 1e-9,
        f"max error {worst:.3e} over 1000 off-plane points (tol 1e-9)",
    )


def test_c06_ransac_plane_fitting():
    # noisy: sigma = 0.01 m along the normal, 40% gross outliers,
    # 10^4 points, 20 seeds
    worst_deg = 0.0
    worst_h = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        n_true = _unit(
            [0.04 * rng.standard_normal(), 1.0, 0.04 * rng.standard_normal()]
        )
        h_true = float(rng.uniform(1.2, 1.8))
        truth = PlaneParams(n_true, h_true)
        x = rng.uniform(-10, 10, 6000)
        z = rng.uniform(2, 30, 6000)
        y = (h_true - n_true[0] * x - n_true[2] * z) / n_true[1]
        pts = np.stack([x, y, z], axis=-1)
        pts += np.outer(rng.normal(0.0, 0.01, 6000), n_true)
        far = []
        kept = 0
        while kept < 4000:
            cand = np.stack(
                [
                    rng.uniform(-10, 10, 4000),
                    rng.uniform(-4, 4, 4000),
                    rng.uniform(2, 30, 4000),
                ],
                axis=-1,
            )
            cand = cand[np.abs(plane_distances(truth, cand)) > 0.2]
            far.append(cand)
            kept += len(cand)
        outliers = np.concatenate(far)[:4000]
        fit, _ = ransac_plane(
            PointCloud(np.concatenate([pts, outliers])), RansacConfig(seed=seed)
        )
        dot = min(abs(float(fit.normal @ n_true)), 1.0)
        worst_deg = max(worst_deg, float(np.degrees(np.arccos(dot))))
        worst_h = max(worst_h, abs(fit.height - h_true))

    # noiseless: recovery must be exact
    rng = np.random.default_rng(77)
    n_true = _unit([0.03, 1.0, -0.02])
    h_true = 1.43
    truth = PlaneParams(n_true, h_true)
    x = rng.uniform(-10, 10, 2000)
    z = rng.uniform(2, 30, 2000)
    y = (h_true - n_true[0] * x - n_true[2] * z) / n_true[1]
    pts = np.stack([x, y, z], axis=-1)
    cand = np.stack(
        [rng.uniform(-10, 10, 3000), rng.uniform(-4, 4, 3000), rng.uniform(2, 30, 3000)],
        axis=-1,
    )
    cand = cand[np.abs(plane_distances(truth, cand)) > 0.2][:800]
    fit, _ = ransac_plane(
        PointCloud(np.concatenate([pts, cand])), RansacConfig(seed=3)
    )
    sgn = 1.0 if fit.normal @ n_true > 0 else -1.0
    err_n = float(np.abs(sgn * fit.normal - n_true).max())
    err_h = abs(fit.height - h_true)
    _check(
        "C06 plane fitting",
        worst_deg < 0.5 and worst_h < 0.01 and err_n < 1e-12 and err_h < 1e-12,
        f"noisy worst: normal {worst_deg:.4f} deg (tol 0.5), height {worst_h:.5f} m "
        f"(tol 0.01); noiseless: normal {err_n:.2e}, height {err_h:.2e} (tol 1e-12)",
    )


def test_c07_photometric_ordering():
    # adding the true residual flow on top of the plane warp must pay
    # off photometrically in every boxed scene, and the road itself must
    # already be tight after the warp alone
    lines = []
    ok = True
    for seed in (7, 11, 23):
        g = ground_truth(default_scene(seed=seed, label=f"scene{seed}"))
        warped, wmask = warp_by_homography(g.source.image, g.homography)
        recon, rok = reconstruct_target(warped, g.flow_res, image_mask=wmask)
        window = erode_mask(rok, 1)  # keep SSIM windows off invalid pixels
        e_full = photometric_energy(g.target.image, recon, window)
        e_homog = photometric_energy(g.target.image, warped, window)
        mae = masked_mae(g.target.image, warped, g.road & wmask)
        ok &= e_full < e_homog and mae < 2.0 / 255.0
        lines.append(
            f"seed {seed}: E_p {e_full:.5f} < {e_homog:.5f}, road MAE {mae:.5f}"
        )
    _check("C07 photometric ordering", ok, "; ".join(lines) + " (road tol 0.00784)")


def test_c08_noisy_flow_degrades_with_distance(scene, gt):
    rng = np.random.default_rng(42)
    noisy = gt.flow_res.values + rng.normal(0.0, 0.5, gt.flow_res.values.shape)
    flow = FlowField(
        np.where(gt.flow_res.valid[..., None], noisy, 0.0), gt.flow_res.valid
    )
    gamma, _ = solve_gamma_map(flow, scene.motion, scene.plane, scene.intrinsics)
    plane_t = transform_plane(scene.plane, scene.motion)
    depth = depth_from_gamma(gamma, plane_t, scene.intrinsics)
    height = height_from_gamma(gamma, depth)
    report = evaluate_pair(height, depth, gt.height, gt.depth)
    maes = [b.depth_mae for b in report.depth_buckets]
    names = [b.name for b in report.depth_buckets]
    assert names == ["d<30", "d<50", "d<80"]
    ok = all(m is not None for m in maes) and maes[0] < maes[1] < maes[2]
    _check(
        "C08 distance degradation",
        ok,
        "0.5 px flow noise, depth MAE "
        + " -> ".join(f"{n} {m:.3f} m" for n, m in zip(names, maes))
        + ", strictly increasing",
    )


def test_c09_energy_unit_checks(gt):
    img = gt.target.image
    ok_id = np.array_equal(ssim_map(img, img), np.ones(img.shape))

    a = Image(np.full((8, 8), 0.2))
    b = Image(np.full((8, 8), 0.8))
    closed = (2 * 0.2 * 0.8 + 1e-4) / (0.2**2 + 0.8**2 + 1e-4)
    assert abs(closed - 0.4706660785178650) < 1e-15
    err_const = float(np.abs(ssim_map(a, b) - closed).max())

    h, w = 12, 16
    xs, ys = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    ref = Image(np.full((h, w), 0.5))
    affine = np.stack(
        [0.25 * xs - 0.5 * ys + 3.0, 1.5 * xs + 0.125 * ys - 2.0], axis=-1
    )
    e_affine = smoothness_energy(FlowField(affine), ref)
    probe = np.stack([xs * xs, np.zeros_like(xs)], axis=-1)
    e_probe = smoothness_energy(FlowField(probe), ref)
    want = 4.0 * (h - 2) * (w - 2)  # second difference of x^2 is 2 per interior cell
    _check(
        "C09 energy units",
        ok_id and err_const < 1e-12 and e_affine == 0.0 and e_probe == want,
        f"SSIM(I,I)=1 exact: {ok_id}; 0.2/0.8 pair vs {closed:.16f} err {err_const:.2e}; "
        f"affine smoothness {e_affine!r}; quadratic probe {e_probe!r} == {want!r}",
    )


def test_c10_attention_contract():
    rng = np.random.default_rng(9)
    fs = rng.normal(size=(3, 8, 9))
    ft = rng.normal(size=(3, 8, 9))

    # singleton field: the one in-frame neighbor gets weight exactly 1
    p1 = default_params(3, 3, field=1, seed=2)
    y1 = cross_attention_forward(fs, ft, p1)
    val = np.tensordot(p1.w_value, ft, axes=([1], [0]))
    ok_single = np.array_equal(y1, val + p1.bias.reshape(1, 1, 3).transpose(2, 0, 1))

    # constant values, zero bias: a convex combination reproduces them
    p5 = default_params(3, 3, field=5, seed=4)
    p5 = AttentionParams(
        p5.w_query, p5.w_key, p5.w_value, np.zeros_like(p5.bias), p5.dilation
    )
    ft_const = np.tile(rng.normal(size=(3, 1, 1)), (1, 8, 9))
    y5 = cross_attention_forward(fs, ft_const, p5)
    v0 = p5.w_value @ ft_const[:, 0, 0]
    err_convex = float(np.abs(y5 - v0[:, None, None]).max())

    # default 19x19 field: radius-10 pokes are invisible, radius-9 is not
    n, c = 41, 20
    fs3 = rng.normal(size=(3, n, n))
    ft3 = rng.normal(size=(3, n, n))
    p19 = default_params(3, 3, field=19, seed=6)
    base = cross_attention_forward(fs3, ft3, p19)
    ok_local = True
    for (dy, dx), inside in (
        ((0, 10), False),
        ((10, 0), False),
        ((10, 10), False),
        ((-10, 5), False),
        ((9, 0), True),
    ):
        poked = ft3.copy()
        poked[:, c + dy, c + dx] += 10.0
        out = cross_attention_forward(fs3, poked, p19)
        same = np.array_equal(out[:, c, c], base[:, c, c])
        ok_local &= same != inside
    _check(
        "C10 attention contract",
        ok_single and err_convex < 1e-12 and ok_local,
        f"singleton identity bitwise: {ok_single}; convex constancy err {err_convex:.2e}; "
        f"19x19 locality bitwise: {ok_local}",
    )


def test_c11_metric_family():
    rng = np.random.default_rng(11)
    gt_map = ScalarMap(rng.uniform(1.0, 60.0, (20, 30)))
    s = depth_metrics(gt_map, gt_map)
    perfect = (
        s["abs_rel"] == 0.0
        and s["rmse"] == 0.0
        and s["delta1"] == 1.0
        and s["delta2"] == 1.0
        and s["delta3"] == 1.0
        and bucket_mae(gt_map, gt_map, gt_map.valid) == 0.0
    )

    mono = True
    for _ in range(100):
        pred = ScalarMap(rng.uniform(1, 80, (8, 9)))
        ref = ScalarMap(rng.uniform(1, 80, (8, 9)))
        m = depth_metrics(pred, ref)
        mono &= m["delta1"] <= m["delta2"] <= m["delta3"]

    m2 = depth_metrics(
        ScalarMap(np.array([[1.0, 2.0]])), ScalarMap(np.array([[2.0, 1.0]]))
    )
    hand = (
        m2["abs_rel"] == 0.75
        and m2["sq_rel"] == 0.75
        and m2["rmse"] == 1.0
        and abs(m2["rmse_log"] - np.log(2.0)) < 1e-15
        and m2["delta1"] == 0.0
        and m2["delta2"] == 0.0
        and m2["delta3"] == 0.0
    )
    _check(
        "C11 metric family",
        perfect and mono and hand,
        f"perfect-prediction zeros: {perfect}; delta monotone on 100 pairs: {mono}; "
        f"two-pixel hand case exact: {hand}",
    )


def test_c12_end_to_end_determinism(tmp_path):
    def run(root):
        sample = root / "sample"
        sol = root / "sol"
        assert (
            cli_main(["gen", "--out", str(sample), "--size", "192x120", "--seed", "3"])
            == 0
        )
        assert (
            cli_main(
                ["solve", "--sample", str(sample), "--out", str(sol), "--flow", "gt"]
            )
            == 0
        )
        assert (
            cli_main(
                [
                    "eval",
                    "--sample",
                    str(sample),
                    "--pred",
                    str(sol),
                    "--out",
                    str(root / "report.csv"),
                ]
            )
            == 0
        )
        return {
            str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    first = run(tmp_path / "a")
    second = run(tmp_path / "b")
    ok = first == second and len(first) >= 15
    _check(
        "C12 determinism",
        ok,
        f"gen+solve+eval twice: {len(first)} artifacts byte-identical",
    )
