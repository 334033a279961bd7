"""Robust road-plane estimation from 3-D points.

RANSAC over minimal 3-point samples, followed by a least-squares refit
(smallest eigenvector of the inlier covariance).  Fully deterministic:
iteration i draws from a fresh generator seeded with seed ^ i, and ties
between candidates break by inlier count, then RMS distance, then
iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, NoConsensus
from .geometry import PlaneParams

# Minimal samples spanning less area than this are redrawn as collinear.
_MIN_TRIANGLE_AREA = 1e-9
_MAX_REDRAWS = 64


@dataclass
class PointCloud:
    """3-D points, optionally tagged with a per-point road flag."""

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("points must be finite")
        self.points = p
        if self.labels is not None:
            m = np.asarray(self.labels, dtype=bool)
            if m.shape != (p.shape[0],):
                raise ValueError("labels must be one bool per point")
            self.labels = m

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 500
    threshold: float = 0.03
    min_inliers: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if not self.threshold > 0:
            raise ValueError("inlier threshold must be positive")
        if self.min_inliers < 3:
            raise ValueError("a plane needs at least 3 inliers")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def plane_distances(plane: PlaneParams, points: np.ndarray) -> np.ndarray:
    """Unsigned point-to-plane distances |N . P - h_c|."""
    P = np.asarray(points, dtype=np.float64)
    return np.abs(P @ plane.normal - plane.height)


def refine_plane(points: np.ndarray) -> PlaneParams:
    """Least-squares plane through >= 3 points of rank >= 2.

    The normal is the eigenvector of the centered covariance with the
    smallest eigenvalue, oriented so the origin-side offset h_c = N . c
    comes out positive (camera above the road).
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 3 or P.shape[0] < 3:
        raise DegenerateInput("plane refinement needs at least 3 points")
    centroid = P.mean(axis=0)
    Q = P - centroid
    cov = Q.T @ Q / P.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    if evals[1] <= 1e-15 * max(evals[2], 1.0):
        raise DegenerateInput("points are (numerically) collinear or coincident")
    n = evecs[:, 0]
    h = float(n @ centroid)
    if h < 0:
        n, h = -n, -h
    if h <= 0:
        raise DegenerateInput("plane passes through the origin; cannot orient")
    return PlaneParams(n / np.linalg.norm(n), h)


def ransac_plane(
    cloud: PointCloud, cfg: RansacConfig = RansacConfig()
) -> tuple[PlaneParams, np.ndarray]:
    """Fit the dominant plane; returns (plane, inlier mask over the cloud).

    When the cloud carries labels, minimal samples and inlier counting
    run on the labeled (road) points only; the returned mask still spans
    the whole cloud.  Raises NoConsensus if no candidate reaches
    cfg.min_inliers.
    """
    if cloud.labels is not None:
        cand_idx = np.flatnonzero(cloud.labels)
    else:
        cand_idx = np.arange(len(cloud))
    pts = cloud.points[cand_idx]
    n_pts = pts.shape[0]
    if n_pts < 3:
        raise DegenerateInput("need at least 3 candidate points")

    best_count = -1
    best_rms = np.inf
    best_inl: np.ndarray | None = None

    for i in range(cfg.iterations):
        rng = np.random.default_rng(cfg.seed ^ i)
        normal = None
        for _ in range(_MAX_REDRAWS):
            idx = rng.choice(n_pts, size=3, replace=False)
            a, b, c = pts[idx]
            cross = np.cross(b - a, c - a)
            norm = np.linalg.norm(cross)
            if 0.5 * norm >= _MIN_TRIANGLE_AREA:
                normal = cross / norm
                anchor = a
                break
        if normal is None:
            continue
        dist = np.abs((pts - anchor) @ normal)
        inl = dist <= cfg.threshold
        count = int(inl.sum())
        if count < 3:
            continue
        rms = float(np.sqrt(np.mean(dist[inl] ** 2)))
        if count > best_count or (count == best_count and rms < best_rms):
            best_count = count
            best_rms = rms
            best_inl = inl.copy()

    if best_inl is None or best_count < cfg.min_inliers:
        raise NoConsensus(
            f"best consensus {max(best_count, 0)} below quorum {cfg.min_inliers}"
        )
    plane = refine_plane(pts[best_inl])
    mask = np.zeros(len(cloud), dtype=bool)
    mask[cand_idx[best_inl]] = True
    return plane, mask
