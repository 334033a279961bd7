"""Command-line interface.

Subcommands cover the full pipeline: generate a synthetic sample, fit
the road plane to its cloud, warp by the plane homography, solve gamma
from flow, reconstruct metric structure, evaluate against ground truth,
and score energies.  Summaries go to stdout as deterministic JSON; logs
go to stderr.  Exit codes: 0 success, 1 structured domain error, 2
usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, metrics
from .energy import EnergyWeights, photometric_energy, total_energy
from .errors import RoadParallaxError
from .geometry import (
    FlowField,
    ScalarMap,
    backproject,
    depth_from_gamma,
    height_from_gamma,
    homography_from_motion,
    residual_flow_map,
    transform_plane,
)
from .imaging import (
    colorize,
    erode_mask,
    masked_mae,
    reconstruct_target,
    warp_by_homography,
)
from .planefit import PointCloud, RansacConfig, ransac_plane
from .solver import block_match_flow, solve_gamma_map
from .synth import default_scene

log = logging.getLogger("roadparallax")


def _print_json(obj) -> None:
    sys.stdout.write(dataio.dumps_deterministic(obj))


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 320x192, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _warp_source(sample):
    hom = homography_from_motion(sample.intrinsics, sample.motion, sample.plane)
    warped, ok = warp_by_homography(sample.source, hom)
    return hom, warped, ok


def _flow_for_solve(sample, args, warped, warp_ok) -> tuple[FlowField, str]:
    mode = args.flow
    if mode == "gt":
        return sample.flow, "gt"
    if mode == "bm":
        flow = block_match_flow(
            warped,
            sample.target,
            patch=args.patch,
            radius=args.radius,
            contrast_threshold=args.contrast,
            source_mask=warp_ok,
        )
        return flow, "bm"
    if mode.startswith("file:"):
        path = Path(mode[5:])
        values = dataio.read_flow_pfm(path)
        mask_path = path.with_name(path.stem + "_mask.pgm")
        valid = dataio.read_mask(mask_path) if mask_path.is_file() else None
        return FlowField(values, valid), f"file:{path}"
    raise argparse.ArgumentTypeError(f"--flow must be bm, gt, or file:PATH, got {mode!r}")


def _write_solution(out: Path, gamma, depth, height, flow=None) -> None:
    dataio.write_pfm(out / "gamma.pfm", gamma.values)
    dataio.write_mask(out / "gamma_mask.pgm", gamma.valid)
    dataio.write_pfm(out / "depth.pfm", depth.values)
    dataio.write_mask(out / "depth_mask.pgm", depth.valid)
    dataio.write_pfm(out / "height.pfm", height.values)
    dataio.write_mask(out / "height_mask.pgm", height.valid)
    if flow is not None:
        dataio.write_flow_pfm(out / "flow.pfm", flow.values)
        dataio.write_mask(out / "flow_mask.pgm", flow.valid)


def _read_prediction(pred_dir: Path) -> tuple[ScalarMap, ScalarMap, ScalarMap]:
    def scalar(name: str) -> ScalarMap:
        return ScalarMap(
            dataio.read_pfm(pred_dir / f"{name}.pfm"),
            dataio.read_mask(pred_dir / f"{name}_mask.pgm"),
        )

    return scalar("gamma"), scalar("depth"), scalar("height")


def _gamma_from_arg(sample, gamma_arg: str | None) -> ScalarMap:
    if gamma_arg is None:
        return sample.gamma
    path = Path(gamma_arg)
    values = dataio.read_pfm(path)
    mask_path = path.with_name(path.stem + "_mask.pgm")
    valid = dataio.read_mask(mask_path) if mask_path.is_file() else None
    return ScalarMap(values, valid)


# -- subcommands ---------------------------------------------------------------

def _cmd_gen(args) -> dict:
    w, h = args.size
    scene = default_scene(width=w, height=h, seed=args.seed, label=args.label)
    sample, gt = dataio.sample_from_scene(scene)
    out = _out_dir(args.out)
    dataio.write_sample(out, sample)
    log.info("wrote sample to %s", out)
    return {
        "command": "gen",
        "out": str(out),
        "width": w,
        "height": h,
        "seed": args.seed,
        "label": args.label,
        "boxes": len(scene.boxes),
        "valid_depth_cells": int(sample.depth.valid.sum()),
        "valid_flow_cells": int(sample.flow.valid.sum()),
        "road_cells": int(sample.road.sum()),
        "cloud_points": len(sample.cloud),
    }


def _cmd_fit_plane(args) -> dict:
    cloud = dataio.read_point_cloud(args.ply)
    if args.ignore_labels:
        cloud = PointCloud(cloud.points, None)
    cfg = RansacConfig(
        iterations=args.ransac_iters,
        threshold=args.ransac_thresh,
        min_inliers=args.min_inliers,
        seed=args.seed,
    )
    plane, inliers = ransac_plane(cloud, cfg)
    from .planefit import plane_distances

    rms = float(np.sqrt(np.mean(plane_distances(plane, cloud.points[inliers]) ** 2)))
    result = {
        "command": "fit-plane",
        "normal": plane.normal.tolist(),
        "h_c": plane.height,
        "inliers": int(inliers.sum()),
        "points": len(cloud),
        "rms": rms,
    }
    if args.out:
        dataio.write_json(args.out, result)
    return result


def _cmd_warp(args) -> dict:
    sample = dataio.read_sample(args.sample)
    hom, warped, ok = _warp_source(sample)
    road_sel = sample.road & ok & sample.flow.valid
    road_mae = masked_mae(warped, sample.target, road_sel)
    summary = {
        "command": "warp",
        "sample": str(args.sample),
        "homography": hom.matrix.tolist(),
        "warp_valid_cells": int(ok.sum()),
        "road_cells": int(road_sel.sum()),
        "road_mae": road_mae,
    }
    if args.out:
        out = _out_dir(args.out)
        dataio.write_image(out / "warped.ppm", warped)
        dataio.write_mask(out / "warped_mask.pgm", ok)
        summary["out"] = str(out)
    return summary


def _cmd_solve(args) -> dict:
    sample = dataio.read_sample(args.sample)
    hom, warped, warp_ok = _warp_source(sample)
    flow, mode = _flow_for_solve(sample, args, warped, warp_ok)
    gamma, report = solve_gamma_map(
        flow, sample.motion, sample.plane, sample.intrinsics
    )
    plane_t = transform_plane(sample.plane, sample.motion)
    depth = depth_from_gamma(gamma, plane_t, sample.intrinsics)
    height = height_from_gamma(gamma, depth)
    out = _out_dir(args.out)
    _write_solution(out, gamma, depth, height, flow)
    dataio.write_json(out / "solver_report.json", report.as_dict())
    log.info("solved %d cells (%s flow) into %s", report.solved, mode, out)
    return {
        "command": "solve",
        "sample": str(args.sample),
        "out": str(out),
        "flow_mode": mode,
        "report": report.as_dict(),
        "depth_cells": int(depth.valid.sum()),
        "height_cells": int(height.valid.sum()),
    }


def _cmd_recon(args) -> dict:
    sample = dataio.read_sample(args.sample)
    gamma = _gamma_from_arg(sample, args.gamma)
    plane_t = transform_plane(sample.plane, sample.motion)
    depth = depth_from_gamma(gamma, plane_t, sample.intrinsics)
    height = height_from_gamma(gamma, depth)
    out = _out_dir(args.out)
    _write_solution(out, gamma, depth, height)
    dataio.write_image(out / "gamma_color.ppm", colorize(gamma))
    dataio.write_image(out / "depth_color.ppm", colorize(depth))
    dataio.write_image(out / "height_color.ppm", colorize(height))

    K = sample.intrinsics
    xs, ys = K.grid()
    sel = depth.valid
    pix = np.stack([xs[sel], ys[sel]], axis=-1)
    pts = backproject(K, pix, depth.values[sel])
    labels = height.values[sel] < 0.05
    dataio.write_point_cloud(out / "points.ply", PointCloud(pts, labels))
    return {
        "command": "recon",
        "sample": str(args.sample),
        "out": str(out),
        "cells": int(sel.sum()),
        "depth_min": float(depth.values[sel].min()) if sel.any() else None,
        "depth_max": float(depth.values[sel].max()) if sel.any() else None,
    }


def _cmd_eval(args) -> dict:
    sample = dataio.read_sample(args.sample)
    _, pred_depth, pred_height = _read_prediction(Path(args.pred))
    buckets = metrics.BucketSpec(
        height_thresholds=args.buckets_h, depth_thresholds=args.buckets_d
    )
    report = metrics.evaluate_pair(
        pred_height, pred_depth, sample.height, sample.depth, buckets
    )
    payload = metrics.report_as_dict(report)
    if args.out:
        out = _out_dir(args.out)
        dataio.write_json(out / "metrics.json", payload)
        try:
            (out / "metrics.csv").write_text(metrics.report_as_csv(report))
        except OSError as e:
            from .errors import IoFailure

            raise IoFailure(f"cannot write metrics.csv: {e}") from e
        payload = dict(payload, out=str(out))
    return dict(payload, command="eval", sample=str(args.sample), pred=str(args.pred))


def _cmd_energy(args) -> dict:
    sample = dataio.read_sample(args.sample)
    gamma = _gamma_from_arg(sample, args.gamma)
    flow = residual_flow_map(gamma, sample.motion, sample.plane, sample.intrinsics)
    hom, warped, warp_ok = _warp_source(sample)
    recon, recon_ok = reconstruct_target(warped, flow, warp_ok)
    # SSIM looks 1 px around each cell; keep windows fully observed
    score_mask = erode_mask(recon_ok, 1)
    weights = EnergyWeights(
        alpha=args.alpha,
        beta=args.beta,
        lambda_p=args.lambda_p,
        lambda_s=args.lambda_s,
        lambda_sm=args.lambda_sm,
    )
    breakdown = total_energy(
        sample.target, recon, score_mask, gamma, sample.gamma, flow, weights
    )
    homog_only = photometric_energy(
        sample.target, warped, score_mask, weights.alpha
    )
    summary = {
        "command": "energy",
        "sample": str(args.sample),
        "mask_cells": int(score_mask.sum()),
        "energies": breakdown.as_dict(),
        "photometric_homography_only": homog_only,
    }
    if args.out:
        dataio.write_json(args.out, summary)
    return summary


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="roadparallax",
        description="Road planar-parallax toolkit: synthetic data, homography "
        "warping, gamma/depth/height recovery, and evaluation.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="render a synthetic two-view sample")
    g.add_argument("--out", required=True, help="output sample directory")
    g.add_argument("--size", type=_parse_size, default=(320, 192), help="WxH")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--label", default="default")
    g.set_defaults(func=_cmd_gen)

    f = sub.add_parser("fit-plane", help="RANSAC road plane from a PLY cloud")
    f.add_argument("--ply", required=True)
    f.add_argument("--ransac-iters", type=int, default=500)
    f.add_argument("--ransac-thresh", type=float, default=0.03)
    f.add_argument("--min-inliers", type=int, default=50)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--ignore-labels", action="store_true")
    f.add_argument("--out", help="optional JSON output path")
    f.set_defaults(func=_cmd_fit_plane)

    w = sub.add_parser("warp", help="warp the source view by the plane homography")
    w.add_argument("--sample", required=True)
    w.add_argument("--out", help="optional directory for warped.ppm")
    w.set_defaults(func=_cmd_warp)

    s = sub.add_parser("solve", help="recover gamma/depth/height from flow")
    s.add_argument("--sample", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--flow", default="bm", help="bm, gt, or file:PATH")
    s.add_argument("--patch", type=int, default=7)
    s.add_argument("--radius", type=int, default=8)
    s.add_argument("--contrast", type=float, default=0.01)
    s.set_defaults(func=_cmd_solve)

    r = sub.add_parser("recon", help="metric maps, colorings, and a cloud from gamma")
    r.add_argument("--sample", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--gamma", help="gamma PFM (default: ground truth)")
    r.set_defaults(func=_cmd_recon)

    e = sub.add_parser("eval", help="bucketed metrics against ground truth")
    e.add_argument("--sample", required=True)
    e.add_argument("--pred", required=True, help="directory written by solve/recon")
    e.add_argument(
        "--buckets-h", type=_parse_floats, default=metrics.DEFAULT_HEIGHT_THRESHOLDS
    )
    e.add_argument(
        "--buckets-d", type=_parse_floats, default=metrics.DEFAULT_DEPTH_THRESHOLDS
    )
    e.add_argument("--out", help="optional directory for metrics.json/csv")
    e.set_defaults(func=_cmd_eval)

    n = sub.add_parser("energy", help="photometric/sparse/smoothness energies")
    n.add_argument("--sample", required=True)
    n.add_argument("--gamma", help="gamma PFM (default: ground truth)")
    n.add_argument("--alpha", type=float, default=0.85)
    n.add_argument("--beta", type=float, default=1.0)
    n.add_argument("--lambda-p", dest="lambda_p", type=float, default=1.0)
    n.add_argument("--lambda-s", dest="lambda_s", type=float, default=1.0)
    n.add_argument("--lambda-sm", dest="lambda_sm", type=float, default=0.1)
    n.add_argument("--out", help="optional JSON output path")
    n.set_defaults(func=_cmd_energy)

    return p


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(
            stream=sys.stderr,
            level=logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        summary = args.func(args)
    except RoadParallaxError as e:
        log.error("%s: %s", type(e).__name__, e)
        _print_json({"error": {"type": type(e).__name__, "message": str(e)}})
        return 1
    _print_json(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
