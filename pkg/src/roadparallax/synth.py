"""Synthetic two-view road scenes with exact ground truth.

The world frame is the source camera frame.  A scene is a road plane
plus a few axis-aligned textured boxes resting on it; both views are
ray-cast analytically (plane and slab intersections in closed form), so
rendered depths are exact and every derived ground-truth quantity
(gamma, height, residual flow) is good to float precision.

Textures are deliberately band-limited: smooth sine checkers plus
smoothly interpolated hash noise, with the road's contrast enveloped by
distance.  Hard edges would alias near the horizon, and resampling
error would then swamp the photometric budgets this data is used to
validate; keep it smooth and the homography-aligned road differs only
by bilinear interpolation error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CameraIntrinsics,
    FlowField,
    Homography,
    PlaneParams,
    RigidMotion,
    ScalarMap,
    apply_homography_masked,
    homography_from_motion,
    rotation_xyz,
    transform_plane,
)
from .imaging import Image
from .planefit import PointCloud

_RAY_EPS = 1e-6  # hits closer than this are treated as self-intersections


def _hash01(ix: np.ndarray, iy: np.ndarray, salt: int) -> np.ndarray:
    """Deterministic lattice hash -> [0, 1); SplitMix-style mixing."""
    salted = (salt * 0x165667B19E3779F9) & 0xFFFFFFFFFFFFFFFF
    h = (
        ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        + iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        + np.uint64(salted)
    )
    h ^= h >> np.uint64(29)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(32)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _value_noise(x: np.ndarray, y: np.ndarray, salt: int) -> np.ndarray:
    """C1-smooth value noise in [0, 1] on the unit lattice."""
    ix = np.floor(x)
    iy = np.floor(y)
    fx = _smoothstep(x - ix)
    fy = _smoothstep(y - iy)
    ix = ix.astype(np.int64)
    iy = iy.astype(np.int64)
    v00 = _hash01(ix, iy, salt)
    v10 = _hash01(ix + 1, iy, salt)
    v01 = _hash01(ix, iy + 1, salt)
    v11 = _hash01(ix + 1, iy + 1, salt)
    top = v00 * (1.0 - fx) + v10 * fx
    bot = v01 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


@dataclass(frozen=True)
class Texture:
    """Smooth procedural surface texture.

    value = base + env * (checker_amp * sin(2 pi u / su) * sin(2 pi v / sv)
                          + noise_amp * (2 * noise(u / ns, v / ns) - 1))

    where env = exp(-(r / fade)^2) attenuates contrast with the in-plane
    distance r from the surface's parameter origin (fade=None keeps full
    contrast everywhere).
    """

    base: float = 0.5
    checker_amp: float = 0.18
    checker_scale: tuple[float, float] = (1.7, 1.7)
    noise_amp: float = 0.07
    noise_scale: float = 0.8
    fade: float | None = None
    salt: int = 0

    def evaluate(self, u: np.ndarray, v: np.ndarray, salt_offset: int = 0) -> np.ndarray:
        su, sv = self.checker_scale
        checker = np.sin(2.0 * np.pi * u / su) * np.sin(2.0 * np.pi * v / sv)
        noise = 2.0 * _value_noise(
            u / self.noise_scale, v / self.noise_scale, self.salt + salt_offset
        ) - 1.0
        detail = self.checker_amp * checker + self.noise_amp * noise
        if self.fade is not None:
            detail = detail * np.exp(-(u * u + v * v) / (self.fade * self.fade))
        return self.base + detail


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the world frame; `size` holds full extents."""

    center: np.ndarray
    size: np.ndarray
    texture: Texture = Texture()
    tint: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        s = np.asarray(self.size, dtype=np.float64)
        if c.shape != (3,) or s.shape != (3,):
            raise ValueError("box center and size must be 3-vectors")
        if np.any(s <= 0):
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to render a deterministic two-view pair."""

    intrinsics: CameraIntrinsics
    motion: RigidMotion
    plane: PlaneParams
    boxes: tuple[Box, ...] = ()
    road_texture: Texture = Texture(fade=12.0)
    road_tint: tuple[float, float, float] = (0.96, 0.97, 1.0)
    sky: tuple[float, float] = (0.58, 0.82)
    seed: int = 0
    label: str = "scene"


@dataclass
class RenderedView:
    image: Image
    depth: ScalarMap
    hits: np.ndarray  # (H, W) int32: -1 sky, 0 road plane, i >= 1 box i-1


@dataclass
class GroundTruth:
    source: RenderedView
    target: RenderedView
    gamma: ScalarMap
    depth: ScalarMap
    height: ScalarMap
    flow_res: FlowField
    flow_opt: FlowField
    homography: Homography
    road: np.ndarray
    cloud: PointCloud


def default_scene(
    width: int = 320, height: int = 192, seed: int = 7, label: str = "default"
) -> SceneSpec:
    """Forward-driving scene: road plane plus three boxes on it."""
    K = CameraIntrinsics(
        fx=220.0, fy=220.0, cx=width / 2.0, cy=height / 2.0, width=width, height=height
    )
    motion = RigidMotion(
        rotation_xyz(0.004, -0.006, 0.002), np.array([0.05, 0.01, -0.8])
    )
    plane = PlaneParams(np.array([0.0, 1.0, 0.0]), 1.5)
    def box_tex(salt: int) -> Texture:
        return Texture(
            base=0.5,
            checker_amp=0.16,
            checker_scale=(0.34, 0.28),
            noise_amp=0.08,
            noise_scale=0.3,
            fade=None,
            salt=salt,
        )
    boxes = (
        Box(np.array([-1.6, 1.05, 7.0]), np.array([0.9, 0.9, 0.9]), box_tex(11), (1.0, 0.82, 0.74)),
        Box(np.array([1.3, 1.15, 10.0]), np.array([0.7, 0.7, 0.7]), box_tex(12), (0.78, 1.0, 0.8)),
        Box(np.array([-0.25, 0.9, 14.0]), np.array([0.8, 1.2, 0.8]), box_tex(13), (0.8, 0.85, 1.0)),
    )
    return SceneSpec(
        intrinsics=K, motion=motion, plane=plane, boxes=boxes, seed=seed, label=label
    )


def _trace(scene: SceneSpec, origin: np.ndarray, dirs: np.ndarray):
    """Nearest-hit ray cast: returns (ray parameter, hit id), id -1 = sky.

    `dirs` has shape (..., 3); the ray parameter equals camera depth
    when directions have unit z in the camera frame.
    """
    shape = dirs.shape[:-1]
    D = dirs.reshape(-1, 3)
    O = origin
    best = np.full(D.shape[0], np.inf)
    hit = np.full(D.shape[0], -1, dtype=np.int32)

    n = scene.plane.normal
    nd = D @ n
    num = scene.plane.height - float(n @ O)
    ok = np.abs(nd) > 1e-12
    s = np.where(ok, num / np.where(ok, nd, 1.0), np.inf)
    ok &= s > _RAY_EPS
    sel = ok & (s < best)
    best[sel] = s[sel]
    hit[sel] = 0

    for j, box in enumerate(scene.boxes):
        lo = box.center - box.size / 2.0
        hi = box.center + box.size / 2.0
        d_safe = np.where(np.abs(D) > 1e-15, D, 1e-15)
        t1 = (lo - O) / d_safe
        t2 = (hi - O) / d_safe
        tn = np.max(np.minimum(t1, t2), axis=1)
        tf = np.min(np.maximum(t1, t2), axis=1)
        okb = (tf >= tn) & (tn > _RAY_EPS)
        sel = okb & (tn < best)
        best[sel] = tn[sel]
        hit[sel] = j + 1

    return best.reshape(shape), hit.reshape(shape)


def _plane_axes(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic in-plane parameter axes for a road-like normal."""
    ez = np.array([0.0, 0.0, 1.0])
    u = ez - (ez @ normal) * normal
    if np.linalg.norm(u) < 1e-6:
        u = np.array([1.0, 0.0, 0.0]) - normal[0] * normal
    u /= np.linalg.norm(u)
    return u, np.cross(normal, u)


def _shade(scene: SceneSpec, points: np.ndarray, hit: np.ndarray, dirs: np.ndarray):
    """Per-ray RGB given hit points / ids; sky is a direction gradient."""
    flat_hit = hit.reshape(-1)
    P = points.reshape(-1, 3)
    D = dirs.reshape(-1, 3)
    rgb = np.empty((flat_hit.shape[0], 3))
    # scene.seed reseeds the value-noise layer of every texture
    salt_off = 1000003 * scene.seed

    sky = flat_hit < 0
    if sky.any():
        dn = D[sky] / np.linalg.norm(D[sky], axis=1, keepdims=True)
        lo, hi = scene.sky
        t = np.clip(-4.0 * dn[:, 1], 0.0, 1.0)
        v = lo + (hi - lo) * t
        rgb[sky] = v[:, None] * np.array([0.88, 0.94, 1.0])

    road = flat_hit == 0
    if road.any():
        ax_u, ax_v = _plane_axes(scene.plane.normal)
        u = P[road] @ ax_u
        v = P[road] @ ax_v
        val = scene.road_texture.evaluate(u, v, salt_off)
        rgb[road] = val[:, None] * np.asarray(scene.road_tint)

    for j, box in enumerate(scene.boxes):
        m = flat_hit == j + 1
        if not m.any():
            continue
        rel = (P[m] - box.center) / (box.size / 2.0)
        face = np.argmax(np.abs(rel), axis=1)
        local = P[m] - box.center
        others = np.array([[1, 2], [0, 2], [0, 1]])
        u = local[np.arange(local.shape[0]), others[face, 0]]
        v = local[np.arange(local.shape[0]), others[face, 1]]
        # offset per face so opposite faces do not mirror each other
        val = box.texture.evaluate(u + 3.1 * face, v - 2.3 * face, salt_off)
        rgb[m] = val[:, None] * np.asarray(box.tint)

    return np.clip(rgb, 0.0, 1.0).reshape(hit.shape + (3,))


def render(scene: SceneSpec, view: str) -> RenderedView:
    """Ray-cast one view ("source" or "target") of the scene."""
    K = scene.intrinsics
    rays_cam = K.unit_plane_rays()
    if view == "source":
        origin = np.zeros(3)
        dirs = rays_cam
    elif view == "target":
        R, T = scene.motion.rotation, scene.motion.translation
        origin = -R.T @ T
        dirs = rays_cam @ R  # row-wise R^T @ d
    else:
        raise ValueError(f"view must be 'source' or 'target', got {view!r}")

    depth, hits = _trace(scene, origin, dirs)
    seen = hits >= 0
    pts = origin + np.where(seen[..., None], depth[..., None], 0.0) * dirs
    rgb = _shade(scene, pts, hits, dirs)
    z = np.where(seen, depth, 0.0)
    return RenderedView(Image(rgb), ScalarMap(z, seen), hits)


def ground_truth(scene: SceneSpec) -> GroundTruth:
    """Render both views and derive exact per-pixel ground truth.

    All maps live on the target grid.  Heights on road hits are exactly
    zero by construction.  Flow validity requires the point to project
    in front of the source camera, inside its frame, unoccluded there,
    and away from the homography's infinity line.
    """
    K = scene.intrinsics
    motion = scene.motion
    src = render(scene, "source")
    tgt = render(scene, "target")
    plane_t = transform_plane(scene.plane, motion)
    H, W = K.height, K.width

    seen = tgt.hits >= 0
    Z_t = tgt.depth.values
    rays = K.unit_plane_rays()
    P_t = rays * Z_t[..., None]

    height = np.zeros((H, W))
    on_box = tgt.hits >= 1
    height[on_box] = plane_t.height - P_t[on_box] @ plane_t.normal
    gamma = np.zeros((H, W))
    gamma[seen] = height[seen] / Z_t[seen]

    # correspondence in the source view
    P_w = motion.inverse().transform(P_t.reshape(-1, 3)).reshape(H, W, 3)
    Z_s = P_w[..., 2]
    front = seen & (Z_s > 1e-9)
    p_s = np.zeros((H, W, 2))
    zs_safe = np.where(front, Z_s, 1.0)
    p_s[..., 0] = K.fx * P_w[..., 0] / zs_safe + K.cx
    p_s[..., 1] = K.fy * P_w[..., 1] / zs_safe + K.cy
    in_frame = (
        front
        & (p_s[..., 0] >= 0.0)
        & (p_s[..., 0] <= W - 1.0)
        & (p_s[..., 1] >= 0.0)
        & (p_s[..., 1] <= H - 1.0)
    )

    # occlusion: cast the exact source ray and require it to reach the point
    visible = np.zeros((H, W), dtype=bool)
    idx = np.flatnonzero(in_frame.reshape(-1))
    if idx.size:
        dirs_s = np.empty((idx.size, 3))
        flat_ps = p_s.reshape(-1, 2)[idx]
        dirs_s[:, 0] = (flat_ps[:, 0] - K.cx) / K.fx
        dirs_s[:, 1] = (flat_ps[:, 1] - K.cy) / K.fy
        dirs_s[:, 2] = 1.0
        s_near, _ = _trace(scene, np.zeros(3), dirs_s)
        zs = Z_s.reshape(-1)[idx]
        vis = s_near >= zs * (1.0 - 1e-6)
        visible.reshape(-1)[idx] = vis

    hom = homography_from_motion(K, motion, scene.plane)
    p_w, w_ok = apply_homography_masked(hom, p_s)
    xs, ys = K.grid()
    grid = np.stack([xs, ys], axis=-1)

    f_ok = in_frame & visible & w_ok
    u_res = np.where(f_ok[..., None], grid - p_w, 0.0)
    u_opt = np.where(f_ok[..., None], p_s - grid, 0.0)

    # cloud sampled from the source view on a stride-3 grid
    s_seen = src.hits >= 0
    sel = np.zeros((H, W), dtype=bool)
    sel[::3, ::3] = True
    sel &= s_seen
    pts = (rays * src.depth.values[..., None])[sel]
    labels = (src.hits == 0)[sel]

    return GroundTruth(
        source=src,
        target=tgt,
        gamma=ScalarMap(gamma, seen),
        depth=tgt.depth.copy(),
        height=ScalarMap(height, seen),
        flow_res=FlowField(u_res, f_ok),
        flow_opt=FlowField(u_opt, f_ok),
        homography=hom,
        road=tgt.hits == 0,
        cloud=PointCloud(pts, labels),
    )
