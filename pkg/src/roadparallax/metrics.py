"""Bucketed evaluation of recovered height, depth, and the depth family.

Buckets are cumulative: a threshold t selects cells whose ground-truth
value is strictly below t (heights in meters, depths in meters), so
successive buckets nest.  Heights get no relative metrics on purpose:
ground-truth heights are legitimately zero on the road.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBucket, EmptyMask, GridMismatch, NonPositiveDepth
from .geometry import ScalarMap, require_same_grid

DEFAULT_HEIGHT_THRESHOLDS = (0.1, 0.3, 0.5, 1.0)
DEFAULT_DEPTH_THRESHOLDS = (30.0, 50.0, 80.0)

_DELTA_BASE = 1.25


@dataclass(frozen=True)
class BucketSpec:
    height_thresholds: tuple[float, ...] = DEFAULT_HEIGHT_THRESHOLDS
    depth_thresholds: tuple[float, ...] = DEFAULT_DEPTH_THRESHOLDS

    def __post_init__(self):
        for name, ts in (
            ("height_thresholds", self.height_thresholds),
            ("depth_thresholds", self.depth_thresholds),
        ):
            ts = tuple(float(t) for t in ts)
            if not ts or any(t <= 0 for t in ts):
                raise ValueError(f"{name} must be positive")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, ts)


@dataclass
class BucketStat:
    """One evaluation bucket: its selection, cell count, and MAEs."""

    name: str
    count: int
    height_mae: float | None = None
    depth_mae: float | None = None


@dataclass
class MetricReport:
    height_buckets: list[BucketStat] = field(default_factory=list)
    depth_buckets: list[BucketStat] = field(default_factory=list)
    joint_buckets: list[BucketStat] = field(default_factory=list)
    depth_stats: dict[str, float] = field(default_factory=dict)
    evaluated_cells: int = 0


def bucket_mae(pred: ScalarMap, gt: ScalarMap, select: np.ndarray) -> float:
    """Mean |pred - gt| over `select` cells valid in both maps."""
    require_same_grid(pred, gt)
    if select.shape != pred.shape:
        raise GridMismatch("selection mask must match the map grid")
    joint = pred.valid & gt.valid & select
    if not joint.any():
        raise EmptyBucket("no valid cells in this bucket")
    return float(np.abs(pred.values[joint] - gt.values[joint]).mean())


def depth_metrics(pred: ScalarMap, gt: ScalarMap) -> dict[str, float]:
    """abs_rel, sq_rel, rmse, rmse_log and delta < 1.25^k accuracies.

    Requires strictly positive depths on the jointly valid cells.
    """
    require_same_grid(pred, gt)
    joint = pred.valid & gt.valid
    if not joint.any():
        raise EmptyMask("no jointly valid depth cells")
    p = pred.values[joint]
    g = gt.values[joint]
    if np.any(p <= 0) or np.any(g <= 0):
        raise NonPositiveDepth("depth metrics need positive depths")
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    out = {
        "abs_rel": float(np.mean(np.abs(diff) / g)),
        "sq_rel": float(np.mean(diff * diff / g)),
        "rmse": float(np.sqrt(np.mean(diff * diff))),
        "rmse_log": float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
    }
    for k in (1, 2, 3):
        out[f"delta{k}"] = float(np.mean(ratio < _DELTA_BASE**k))
    return out


def _stat(
    name: str,
    select: np.ndarray,
    pred_h: ScalarMap,
    gt_h: ScalarMap,
    pred_d: ScalarMap,
    gt_d: ScalarMap,
    want_h: bool,
    want_d: bool,
) -> BucketStat:
    joint = select.copy()
    if want_h:
        joint &= pred_h.valid & gt_h.valid
    if want_d:
        joint &= pred_d.valid & gt_d.valid
    n = int(joint.sum())
    stat = BucketStat(name=name, count=n)
    if n == 0:
        return stat
    if want_h:
        stat.height_mae = float(
            np.abs(pred_h.values[joint] - gt_h.values[joint]).mean()
        )
    if want_d:
        stat.depth_mae = float(np.abs(pred_d.values[joint] - gt_d.values[joint]).mean())
    return stat


def evaluate_pair(
    pred_height: ScalarMap,
    pred_depth: ScalarMap,
    gt_height: ScalarMap,
    gt_depth: ScalarMap,
    buckets: BucketSpec = BucketSpec(),
) -> MetricReport:
    """Bucketed MAEs plus the standard depth metric family.

    Buckets select on ground truth only; empty buckets are reported
    with count 0 and absent (None) MAEs, never as zeros.
    """
    require_same_grid(pred_height, gt_height)
    require_same_grid(pred_depth, gt_depth)
    require_same_grid(gt_height, gt_depth)

    report = MetricReport()
    for t in buckets.height_thresholds:
        sel = gt_height.valid & (gt_height.values < t)
        report.height_buckets.append(
            _stat(f"h<{t:g}", sel, pred_height, gt_height, pred_depth, gt_depth, True, False)
        )
    for t in buckets.depth_thresholds:
        sel = gt_depth.valid & (gt_depth.values < t)
        report.depth_buckets.append(
            _stat(f"d<{t:g}", sel, pred_height, gt_height, pred_depth, gt_depth, False, True)
        )
    for td in buckets.depth_thresholds:
        for th in buckets.height_thresholds:
            sel = (
                gt_depth.valid
                & gt_height.valid
                & (gt_depth.values < td)
                & (gt_height.values < th)
            )
            report.joint_buckets.append(
                _stat(
                    f"d<{td:g},h<{th:g}",
                    sel,
                    pred_height,
                    gt_height,
                    pred_depth,
                    gt_depth,
                    True,
                    True,
                )
            )

    joint = pred_depth.valid & gt_depth.valid
    report.evaluated_cells = int(joint.sum())
    if report.evaluated_cells:
        report.depth_stats = depth_metrics(pred_depth, gt_depth)
    return report


def report_as_dict(report: MetricReport) -> dict:
    def bucket(b: BucketStat) -> dict:
        return {
            "bucket": b.name,
            "count": b.count,
            "height_mae": b.height_mae,
            "depth_mae": b.depth_mae,
        }

    return {
        "height_buckets": [bucket(b) for b in report.height_buckets],
        "depth_buckets": [bucket(b) for b in report.depth_buckets],
        "joint_buckets": [bucket(b) for b in report.joint_buckets],
        "depth_stats": report.depth_stats,
        "evaluated_cells": report.evaluated_cells,
    }


def report_as_csv(report: MetricReport) -> str:
    """One row per bucket/metric: metric,bucket,value,count."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "bucket", "value", "count"])

    def fmt(v: float | None) -> str:
        return "" if v is None else repr(float(v))

    for b in report.height_buckets:
        w.writerow(["height_mae", b.name, fmt(b.height_mae), b.count])
    for b in report.depth_buckets:
        w.writerow(["depth_mae", b.name, fmt(b.depth_mae), b.count])
    for b in report.joint_buckets:
        w.writerow(["joint_height_mae", b.name, fmt(b.height_mae), b.count])
        w.writerow(["joint_depth_mae", b.name, fmt(b.depth_mae), b.count])
    for key, val in report.depth_stats.items():
        w.writerow([key, "all", fmt(val), report.evaluated_cells])
    return buf.getvalue()
