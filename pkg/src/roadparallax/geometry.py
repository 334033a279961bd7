"""Two-view road-plane geometry: homographies, residual parallax, gamma.

Conventions (used everywhere in this package):

* Camera frame: x right, y down, z forward (optical axis).  Pixel
  coordinates are p = (x, y) with x the column and y the row; no 0.5
  pixel-center offset, pixel (0, 0) is the ray through the top-left
  sample of the grid.
* The road plane satisfies N . P = h_c for points P on the plane, with
  the unit normal N oriented so that h_c > 0 (roughly (0, 1, 0) for a
  camera above the road).  The height of a point P above the plane is
  h = h_c - N . P, positive toward the camera side.
* Rigid motion maps source-frame points into the target frame,
  P_t = R @ P_s + T.  Plane parameters attached to a two-view pair are
  expressed in the source frame; `transform_plane` rebases them.
* gamma = h / Z pairs the height of a point with its depth in whichever
  camera anchors the map (target camera for solver outputs).
* The plane homography H = K (R + T N^T / h_c) K^-1 maps source pixels
  of plane points onto their target pixels.  Stored residual flow at a
  target pixel p is u = p - p^w, where p^w is the homography-warped
  position of the matching source pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePlane,
    GridMismatch,
    MapsToInfinity,
    NonPositiveDepth,
    ParallaxSingularity,
)

# Numerical guards.  EPS_Z decides whether the epipole exists, EPS_SING
# protects the 1 - k parallax denominator, EPS_DEN the gamma-to-depth
# denominator, EPS_DIV the projective divisions.
EPS_Z = 1e-9
EPS_SING = 1e-9
EPS_DEN = 1e-9
EPS_DIV = 1e-12


def _as_float_array(x, name: str, shape: tuple[int, ...]) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics plus the pixel-grid size they serve."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid size must be at least 1x1")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the grid")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def inverse_matrix(self) -> np.ndarray:
        # Closed form; avoids a linear solve and its rounding.
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel coordinate arrays (xs, ys), each (height, width)."""
        xs, ys = np.meshgrid(
            np.arange(self.width, dtype=np.float64),
            np.arange(self.height, dtype=np.float64),
        )
        return xs, ys

    def unit_plane_rays(self) -> np.ndarray:
        """K^-1 (x, y, 1) per pixel, shape (height, width, 3); ray z == 1."""
        xs, ys = self.grid()
        rays = np.empty((self.height, self.width, 3))
        rays[..., 0] = (xs - self.cx) / self.fx
        rays[..., 1] = (ys - self.cy) / self.fy
        rays[..., 2] = 1.0
        return rays


@dataclass(frozen=True)
class RigidMotion:
    """Rigid transform P_t = R @ P_s + T from source to target frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _as_float_array(self.rotation, "rotation", (3, 3))
        T = _as_float_array(self.translation, "translation", (3,))
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", T)
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthonormal with det +1")

    def transform(self, points: np.ndarray) -> np.ndarray:
        P = np.asarray(points, dtype=np.float64)
        return P @ self.rotation.T + self.translation

    def inverse(self) -> "RigidMotion":
        return RigidMotion(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, first: "RigidMotion") -> "RigidMotion":
        """Motion equivalent to applying `first`, then self."""
        return RigidMotion(
            self.rotation @ first.rotation,
            self.rotation @ first.translation + self.translation,
        )


def rotation_xyz(rx: float, ry: float, rz: float) -> np.ndarray:
    """R = Rz @ Ry @ Rx for rotations about the camera axes (radians)."""
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]], dtype=np.float64)
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]], dtype=np.float64)
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]], dtype=np.float64)
    return Rz @ Ry @ Rx


@dataclass(frozen=True)
class PlaneParams:
    """Road plane N . P = h_c with unit N and camera height h_c > 0."""

    normal: np.ndarray
    height: float

    def __post_init__(self):
        N = _as_float_array(self.normal, "normal", (3,))
        object.__setattr__(self, "normal", N)
        if abs(np.linalg.norm(N) - 1.0) > 1e-9:
            raise DegeneratePlane("plane normal must be a unit vector")
        if not self.height > 0:
            raise DegeneratePlane("camera height above the plane must be positive")


def transform_plane(plane: PlaneParams, motion: RigidMotion) -> PlaneParams:
    """Re-express a source-frame plane in the target frame of `motion`.

    N_t = R N_s and h_c,t = h_c,s + N_t . T; point heights above the
    plane are invariant under this rebasing.
    """
    n_t = motion.rotation @ plane.normal
    h_t = plane.height + float(n_t @ motion.translation)
    if h_t <= 0:
        raise DegeneratePlane("target camera is not above the plane")
    return PlaneParams(n_t, h_t)


@dataclass(frozen=True)
class Homography:
    """3x3 projective map between pixel grids (source -> target here)."""

    matrix: np.ndarray

    def __post_init__(self):
        H = _as_float_array(self.matrix, "matrix", (3, 3))
        object.__setattr__(self, "matrix", H)

    def inverse(self) -> "Homography":
        from .errors import SingularHomography

        scale = np.max(np.abs(self.matrix))
        if scale == 0.0 or abs(np.linalg.det(self.matrix / scale)) < EPS_DIV:
            raise SingularHomography("homography matrix is not invertible")
        return Homography(np.linalg.inv(self.matrix))

    @property
    def third_row(self) -> np.ndarray:
        return self.matrix[2]


@dataclass(frozen=True)
class Epipole:
    """Image of the source camera center in the target view, if finite."""

    point: np.ndarray
    defined: bool


@dataclass
class ScalarMap:
    """A per-pixel float map with a validity mask (gamma, depth, height)."""

    values: np.ndarray
    valid: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise GridMismatch(f"scalar map must be 2-D, got shape {v.shape}")
        if self.valid is None:
            m = np.ones(v.shape, dtype=bool)
        else:
            m = np.asarray(self.valid, dtype=bool)
        if m.shape != v.shape:
            raise GridMismatch(f"mask shape {m.shape} != values shape {v.shape}")
        if not np.all(np.isfinite(v[m])):
            raise ValueError("valid cells must hold finite values")
        self.values = v
        self.valid = m

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def copy(self) -> "ScalarMap":
        return ScalarMap(self.values.copy(), self.valid.copy())


@dataclass
class FlowField:
    """Per-pixel 2-vector map u = p - p^w on the target grid, with mask."""

    values: np.ndarray
    valid: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 2:
            raise GridMismatch(f"flow field must be (H, W, 2), got {v.shape}")
        if self.valid is None:
            m = np.ones(v.shape[:2], dtype=bool)
        else:
            m = np.asarray(self.valid, dtype=bool)
        if m.shape != v.shape[:2]:
            raise GridMismatch(f"mask shape {m.shape} != grid {v.shape[:2]}")
        if not np.all(np.isfinite(v[m])):
            raise ValueError("valid cells must hold finite flow")
        self.values = v
        self.valid = m

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]  # type: ignore[return-value]

    def copy(self) -> "FlowField":
        return FlowField(self.values.copy(), self.valid.copy())


def require_same_grid(a, b) -> None:
    if tuple(a.shape) != tuple(b.shape):
        raise GridMismatch(f"grids differ: {tuple(a.shape)} vs {tuple(b.shape)}")


# -- projection --------------------------------------------------------------

def project(K: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """Project camera-frame points (..., 3) to pixels (..., 2)."""
    P = np.asarray(points, dtype=np.float64)
    Z = P[..., 2]
    if np.any(Z <= 0):
        raise NonPositiveDepth("cannot project points at or behind the camera")
    p = np.empty(P.shape[:-1] + (2,))
    p[..., 0] = K.fx * P[..., 0] / Z + K.cx
    p[..., 1] = K.fy * P[..., 1] / Z + K.cy
    return p


def backproject(K: CameraIntrinsics, pixels: np.ndarray, depth) -> np.ndarray:
    """Lift pixels (..., 2) at depth Z (scalar or (...,)) to points (..., 3)."""
    p = np.asarray(pixels, dtype=np.float64)
    Z = np.asarray(depth, dtype=np.float64)
    if np.any(Z <= 0):
        raise NonPositiveDepth("depth must be positive")
    P = np.empty(p.shape[:-1] + (3,))
    P[..., 0] = (p[..., 0] - K.cx) / K.fx * Z
    P[..., 1] = (p[..., 1] - K.cy) / K.fy * Z
    P[..., 2] = Z
    return P


def height_of_point(plane: PlaneParams, points: np.ndarray):
    """Height h = h_c - N . P of camera-frame points above the plane."""
    P = np.asarray(points, dtype=np.float64)
    return plane.height - P @ plane.normal


def gamma_of(height, depth):
    """gamma = h / Z; heights may be negative, depths must be positive."""
    h = np.asarray(height, dtype=np.float64)
    Z = np.asarray(depth, dtype=np.float64)
    if np.any(Z <= 0):
        raise NonPositiveDepth("gamma requires positive depth")
    return h / Z


# -- plane homography ---------------------------------------------------------

def homography_from_motion(
    K: CameraIntrinsics, motion: RigidMotion, plane: PlaneParams
) -> Homography:
    """H = K (R + T N^T / h_c) K^-1 sending source pixels of plane points
    to their target pixels.  `plane` is in the source frame."""
    if plane.height <= 0:
        raise DegeneratePlane("camera height must be positive")
    G = motion.rotation + np.outer(motion.translation, plane.normal) / plane.height
    Km = K.matrix()
    return Homography(Km @ G @ K.inverse_matrix())


def apply_homography(H: Homography, pixels: np.ndarray) -> np.ndarray:
    """Apply H to pixels (..., 2); raises MapsToInfinity near w = 0."""
    p = np.asarray(pixels, dtype=np.float64)
    M = H.matrix
    w = M[2, 0] * p[..., 0] + M[2, 1] * p[..., 1] + M[2, 2]
    if np.any(np.abs(w) < EPS_DIV):
        raise MapsToInfinity("point maps (numerically) to the line at infinity")
    out = np.empty_like(p)
    out[..., 0] = (M[0, 0] * p[..., 0] + M[0, 1] * p[..., 1] + M[0, 2]) / w
    out[..., 1] = (M[1, 0] * p[..., 0] + M[1, 1] * p[..., 1] + M[1, 2]) / w
    return out


def apply_homography_masked(
    H: Homography, pixels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Dense variant of `apply_homography`: bad cells are masked, not raised."""
    p = np.asarray(pixels, dtype=np.float64)
    M = H.matrix
    w = M[2, 0] * p[..., 0] + M[2, 1] * p[..., 1] + M[2, 2]
    ok = np.abs(w) >= EPS_DIV
    w_safe = np.where(ok, w, 1.0)
    out = np.empty_like(p)
    out[..., 0] = (M[0, 0] * p[..., 0] + M[0, 1] * p[..., 1] + M[0, 2]) / w_safe
    out[..., 1] = (M[1, 0] * p[..., 0] + M[1, 1] * p[..., 1] + M[1, 2]) / w_safe
    out[~ok] = 0.0
    return out, ok


def homography_displacement(pixels: np.ndarray, H: Homography) -> np.ndarray:
    """Planar displacement H(p) - p per pixel."""
    p = np.asarray(pixels, dtype=np.float64)
    return apply_homography(H, p) - p


# -- residual parallax --------------------------------------------------------

def epipole(K: CameraIntrinsics, motion: RigidMotion) -> Epipole:
    """Target-view epipole e = (t_x, t_y) / t_z with t = K T.

    Undefined (defined=False, point zeroed) when |T_z| <= EPS_Z.
    """
    t = K.matrix() @ motion.translation
    if abs(t[2]) <= EPS_Z:
        return Epipole(np.zeros(2), False)
    return Epipole(t[:2] / t[2], True)


def residual_flow_at(
    pixel: np.ndarray,
    gamma: float,
    motion: RigidMotion,
    plane: PlaneParams,
    K: CameraIntrinsics,
) -> np.ndarray:
    """Residual flow u = p - p^w at one target pixel with ratio gamma.

    General motion: u = (-k / (1 - k)) (p - e) with k = gamma T_z / h_c.
    Lateral motion (T_z == 0): u = (gamma / h_c) (t_x, t_y), t = K T; the
    two branches agree in the T_z -> 0 limit.  `plane` is source-frame.
    """
    p = _as_float_array(pixel, "pixel", (2,))
    e = epipole(K, motion)
    if e.defined:
        k = gamma * motion.translation[2] / plane.height
        if abs(1.0 - k) <= EPS_SING:
            raise ParallaxSingularity("1 - gamma T_z / h_c vanished")
        return (-k / (1.0 - k)) * (p - e.point)
    t = K.matrix() @ motion.translation
    return (gamma / plane.height) * t[:2]


def residual_flow_map(
    gamma_map: ScalarMap,
    motion: RigidMotion,
    plane: PlaneParams,
    K: CameraIntrinsics,
) -> FlowField:
    """Dense residual flow over the target grid; singular cells are masked."""
    if gamma_map.shape != (K.height, K.width):
        raise GridMismatch(
            f"gamma map {gamma_map.shape} does not fit grid {(K.height, K.width)}"
        )
    xs, ys = K.grid()
    g = np.where(gamma_map.valid, gamma_map.values, 0.0)
    out = np.zeros((K.height, K.width, 2))
    e = epipole(K, motion)
    if e.defined:
        k = g * (motion.translation[2] / plane.height)
        ok = gamma_map.valid & (np.abs(1.0 - k) > EPS_SING)
        k_safe = np.where(ok, k, 0.0)
        f = -k_safe / (1.0 - k_safe)
        out[..., 0] = f * (xs - e.point[0])
        out[..., 1] = f * (ys - e.point[1])
    else:
        t = K.matrix() @ motion.translation
        ok = gamma_map.valid.copy()
        out[..., 0] = g / plane.height * t[0]
        out[..., 1] = g / plane.height * t[1]
    out[~ok] = 0.0
    return FlowField(out, ok)


# -- gamma to metric structure ------------------------------------------------

def depth_from_gamma(
    gamma_map: ScalarMap, plane: PlaneParams, K: CameraIntrinsics
) -> ScalarMap:
    """Depth Z = h_c / (gamma + N . K^-1 (x, y, 1)) on the map's own grid.

    `plane` must be expressed in the camera that anchors the map (use
    `transform_plane` for target-grid maps of a two-view pair).  Cells
    with a vanishing denominator or non-positive depth are masked.
    """
    if gamma_map.shape != (K.height, K.width):
        raise GridMismatch(
            f"gamma map {gamma_map.shape} does not fit grid {(K.height, K.width)}"
        )
    rays = K.unit_plane_rays()
    den = np.where(gamma_map.valid, gamma_map.values, 0.0) + rays @ plane.normal
    ok = gamma_map.valid & (np.abs(den) > EPS_DEN)
    Z = np.where(ok, plane.height / np.where(ok, den, 1.0), 0.0)
    ok &= Z > 0
    Z[~ok] = 0.0
    return ScalarMap(Z, ok)


def height_from_gamma(gamma_map: ScalarMap, depth_map: ScalarMap) -> ScalarMap:
    """Height h = gamma * Z on the jointly valid cells."""
    require_same_grid(gamma_map, depth_map)
    ok = gamma_map.valid & depth_map.valid
    h = np.zeros(gamma_map.shape)
    h[ok] = gamma_map.values[ok] * depth_map.values[ok]
    return ScalarMap(h, ok)
