"""Recover gamma = h/Z from residual parallax, and measure that parallax.

Inversion of the residual-flow model: with epipole e and k = gamma
T_z / h_c, the flow at a target pixel is u = (-k / (1 - k)) (p - e), so
the scalar factor along (p - e) gives k and then gamma.  Pixels too
close to the epipole carry no usable signal and are excluded.  For
lateral motion (T_z = 0) the flow is u = (gamma / h_c) (t_x, t_y) and
gamma follows from the component of u along that fixed direction.

`block_match_flow` measures residual parallax directly between the
homography-warped source and the target image with SAD patch matching
(the compiled kernel when available).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    EpipoleDegeneracy,
    GridMismatch,
    PatchTooLarge,
    SingularRatio,
    ZeroTranslation,
)
from .geometry import (
    EPS_SING,
    EPS_Z,
    CameraIntrinsics,
    FlowField,
    PlaneParams,
    RigidMotion,
    ScalarMap,
    epipole,
)
from .imaging import Image, erode_mask

# Pixels within this radius of the epipole are excluded from the solve.
EPIPOLE_EXCLUSION_PX = 2.0


@dataclass(frozen=True)
class SolverReport:
    """Cell accounting of a dense gamma solve."""

    mode: str  # "general", "lateral", or "degenerate"
    total: int
    input_valid: int
    solved: int
    near_epipole: int
    singular: int

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "total": self.total,
            "input_valid": self.input_valid,
            "solved": self.solved,
            "near_epipole": self.near_epipole,
            "singular": self.singular,
        }


def solve_gamma_at(
    pixel: np.ndarray,
    flow_u: np.ndarray,
    motion: RigidMotion,
    plane: PlaneParams,
    K: CameraIntrinsics,
) -> float:
    """Invert the parallax model at one pixel (general motion).

    Projects u onto (p - e), recovers k = c / (c - 1) from the factor
    c, and returns gamma = k h_c / T_z.  `plane` is source-frame.
    """
    e = epipole(K, motion)
    if not e.defined:
        raise EpipoleDegeneracy(
            "epipole undefined (|T_z| ~ 0); use solve_gamma_tz0 for lateral motion"
        )
    p = np.asarray(pixel, dtype=np.float64)
    u = np.asarray(flow_u, dtype=np.float64)
    d = p - e.point
    n2 = float(d @ d)
    if np.sqrt(n2) <= EPIPOLE_EXCLUSION_PX:
        raise EpipoleDegeneracy("pixel too close to the epipole")
    c = float(u @ d) / n2
    if abs(c - 1.0) <= EPS_SING:
        raise SingularRatio("flow factor c = 1; gamma is unbounded here")
    k = c / (c - 1.0)
    return k * plane.height / motion.translation[2]


def solve_gamma_tz0(
    flow_u: np.ndarray,
    motion: RigidMotion,
    plane: PlaneParams,
    K: CameraIntrinsics,
) -> float:
    """Invert the lateral-motion model u = (gamma / h_c) (t_x, t_y)."""
    if abs(motion.translation[2]) > EPS_Z:
        raise ValueError("motion has significant T_z; use solve_gamma_at")
    t = K.matrix() @ motion.translation
    n2 = float(t[0] * t[0] + t[1] * t[1])
    if np.sqrt(n2) <= EPS_Z:
        raise ZeroTranslation("no translation; parallax carries no depth signal")
    u = np.asarray(flow_u, dtype=np.float64)
    return plane.height * float(u @ t[:2]) / n2


def solve_gamma_map(
    flow: FlowField,
    motion: RigidMotion,
    plane: PlaneParams,
    K: CameraIntrinsics,
) -> tuple[ScalarMap, SolverReport]:
    """Dense gamma from residual flow on the target grid.

    Never raises on degenerate motion: pure rotation yields an
    all-invalid map with mode "degenerate".  Cells near the epipole or
    with a singular factor are masked and counted.
    """
    if flow.shape != (K.height, K.width):
        raise GridMismatch(
            f"flow grid {flow.shape} does not fit camera grid {(K.height, K.width)}"
        )
    total = K.height * K.width
    input_valid = int(flow.valid.sum())
    xs, ys = K.grid()
    u = flow.values
    e = epipole(K, motion)

    if e.defined:
        dx = xs - e.point[0]
        dy = ys - e.point[1]
        n2 = dx * dx + dy * dy
        near = flow.valid & (np.sqrt(n2) <= EPIPOLE_EXCLUSION_PX)
        usable = flow.valid & ~near
        n2_safe = np.where(n2 > 0, n2, 1.0)
        c = (u[..., 0] * dx + u[..., 1] * dy) / n2_safe
        singular_mask = usable & (np.abs(c - 1.0) <= EPS_SING)
        ok = usable & ~singular_mask
        cf = np.where(ok, c, 0.0)
        k = cf / (cf - 1.0)
        gamma = k * (plane.height / motion.translation[2])
        gamma[~ok] = 0.0
        report = SolverReport(
            mode="general",
            total=total,
            input_valid=input_valid,
            solved=int(ok.sum()),
            near_epipole=int(near.sum()),
            singular=int(singular_mask.sum()),
        )
        return ScalarMap(gamma, ok), report

    t = K.matrix() @ motion.translation
    n2 = float(t[0] * t[0] + t[1] * t[1])
    if np.sqrt(n2) <= EPS_Z:
        gamma = np.zeros((K.height, K.width))
        report = SolverReport(
            mode="degenerate",
            total=total,
            input_valid=input_valid,
            solved=0,
            near_epipole=0,
            singular=0,
        )
        return ScalarMap(gamma, np.zeros((K.height, K.width), dtype=bool)), report

    ok = flow.valid.copy()
    gamma = plane.height * (u[..., 0] * t[0] + u[..., 1] * t[1]) / n2
    gamma[~ok] = 0.0
    report = SolverReport(
        mode="lateral",
        total=total,
        input_valid=input_valid,
        solved=int(ok.sum()),
        near_epipole=0,
        singular=0,
    )
    return ScalarMap(gamma, ok), report


def block_match_flow(
    warped_source: Image,
    target: Image,
    patch: int = 7,
    radius: int = 8,
    contrast_threshold: float = 0.01,
    source_mask: np.ndarray | None = None,
) -> FlowField:
    """Measure residual flow by SAD patch matching.

    cost(p, d) compares the target patch at p against the warped-source
    patch at p - d, so the winning d is directly the stored residual
    flow u = p - p^w.  Cells whose patch or search window leaves the
    frame, or whose cost spread falls under `contrast_threshold`, or
    (when `source_mask` is given) whose search window touches invalid
    warped pixels, come back invalid.
    """
    if patch < 1 or patch % 2 == 0:
        raise ValueError("patch size must be odd and positive")
    if radius < 1:
        raise ValueError("search radius must be at least 1")
    if warped_source.shape != target.shape:
        raise GridMismatch("images must share a grid")
    H, W = target.shape
    margin = patch // 2 + radius
    if H - 2 * margin <= 0 or W - 2 * margin <= 0:
        raise PatchTooLarge(
            f"patch {patch} with radius {radius} leaves no interior in {W}x{H}"
        )
    src = np.ascontiguousarray(warped_source.gray())
    tgt = np.ascontiguousarray(target.gray())
    flow, valid = _kernels.sad_block_match(
        src, tgt, int(patch), int(radius), float(contrast_threshold)
    )
    if source_mask is not None:
        if source_mask.shape != (H, W):
            raise GridMismatch("source mask must match the image grid")
        valid &= erode_mask(source_mask, margin)
        flow[~valid] = 0.0
    return FlowField(flow, valid)
