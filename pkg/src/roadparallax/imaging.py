"""Image container, bilinear warping, and flow-based reconstruction.

All warps are backward: every output pixel samples the input image, so
no splatting artifacts and masks fall out of sample validity.  A sample
at float position (x, y) is valid iff 0 <= x <= W-1 and 0 <= y <= H-1;
integer positions reproduce stored intensities bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import GridMismatch
from .geometry import FlowField, Homography, ScalarMap, apply_homography_masked

# Slack for float round-off on the nominal [0, 1] intensity range.
_RANGE_TOL = 1e-9


@dataclass
class Image:
    """Float image, shape (H, W, C) with C = 1 (gray) or 3 (RGB), in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise GridMismatch(f"image must be (H, W, 1|3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("image intensities must be finite")
        if a.min() < -_RANGE_TOL or a.max() > 1.0 + _RANGE_TOL:
            raise ValueError("image intensities must lie in [0, 1]")
        self.data = np.ascontiguousarray(a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def gray(self) -> np.ndarray:
        """Channel-mean intensity, shape (H, W)."""
        return self.data.mean(axis=2)

    def copy(self) -> "Image":
        return Image(self.data.copy())


def bilinear_sample(image: Image, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample the image at float pixel positions (..., 2).

    Returns (values (..., C), valid (...)); out-of-frame samples are
    zeroed and flagged invalid.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.shape[-1] != 2:
        raise GridMismatch(f"sample positions must be (..., 2), got {p.shape}")
    lead = p.shape[:-1]
    xs = np.ascontiguousarray(p[..., 0].reshape(-1))
    ys = np.ascontiguousarray(p[..., 1].reshape(-1))
    values, valid = _kernels.bilinear_gather(image.data, xs, ys)
    return values.reshape(lead + (image.channels,)), valid.reshape(lead)


def warp_by_homography(image: Image, hom: Homography) -> tuple[Image, np.ndarray]:
    """Resample `image` onto the grid that `hom` maps its pixels into.

    `hom` carries input pixels to output pixels (for a two-view pair:
    the source-to-target plane homography, applied to the source image,
    yields the warped source aligned with the target).  Output pixels
    whose preimage leaves the input frame are zeroed and masked.
    """
    inv = hom.inverse()
    xs, ys = np.meshgrid(
        np.arange(image.width, dtype=np.float64),
        np.arange(image.height, dtype=np.float64),
    )
    grid = np.stack([xs, ys], axis=-1)
    pre, finite = apply_homography_masked(inv, grid)
    values, ok = bilinear_sample(image, pre)
    ok &= finite
    values[~ok] = 0.0
    return Image(values), ok


def reconstruct_target(
    image: Image, flow: FlowField, image_mask: np.ndarray | None = None
) -> tuple[Image, np.ndarray]:
    """Sample `image` at p - u(p) for every grid pixel p.

    With `image` the homography-warped source and `flow` the stored
    residual parallax, this rebuilds the target view; compare against
    the real target to score a gamma field photometrically.  When
    `image_mask` marks which input pixels hold real data (a warp mask),
    output pixels whose bilinear footprint touches masked-out input are
    dropped too.
    """
    if flow.shape != image.shape:
        raise GridMismatch(f"flow grid {flow.shape} != image grid {image.shape}")
    xs, ys = np.meshgrid(
        np.arange(image.width, dtype=np.float64),
        np.arange(image.height, dtype=np.float64),
    )
    pos = np.stack([xs - flow.values[..., 0], ys - flow.values[..., 1]], axis=-1)
    values, ok = bilinear_sample(image, pos)
    ok &= flow.valid
    if image_mask is not None:
        if image_mask.shape != image.shape:
            raise GridMismatch("image mask must match the image grid")
        cover, cov_ok = bilinear_sample(
            Image(image_mask.astype(np.float64)[:, :, None]), pos
        )
        ok &= cov_ok & (cover[..., 0] >= 1.0 - 1e-9)
    values[~ok] = 0.0
    return Image(values), ok


def erode_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """True where the whole (2*radius+1)^2 window is in-mask.

    Use before windowed comparisons (SSIM, patch costs) so no window
    straddles invalid pixels; grid borders erode away too.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise GridMismatch(f"mask must be 2-D, got shape {m.shape}")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return m.copy()
    H, W = m.shape
    out = np.zeros((H, W), dtype=bool)
    if H - 2 * radius <= 0 or W - 2 * radius <= 0:
        return out
    bad = (~m).astype(np.float64)
    c = np.zeros((H + 1, W + 1))
    np.cumsum(np.cumsum(bad, axis=0), axis=1, out=c[1:, 1:])
    size = 2 * radius + 1
    s = c[size:, size:] - c[:-size, size:] - c[size:, :-size] + c[:-size, :-size]
    out[radius : H - radius, radius : W - radius] = s == 0.0
    return out


def masked_mae(a: Image, b: Image, mask: np.ndarray) -> float:
    """Mean absolute intensity difference over masked pixels (all channels)."""
    if a.shape != b.shape or a.channels != b.channels:
        raise GridMismatch("images must share a grid to compare")
    if mask.shape != a.shape:
        raise GridMismatch("mask must match the image grid")
    if not mask.any():
        from .errors import EmptyMask

        raise EmptyMask("no pixels selected")
    return float(np.mean(np.abs(a.data[mask] - b.data[mask])))


def colorize(scalar: ScalarMap, vmin: float | None = None, vmax: float | None = None) -> Image:
    """Map a scalar field to a blue-to-red image; invalid cells go black."""
    vals = scalar.values
    ok = scalar.valid
    if ok.any():
        lo = float(vals[ok].min()) if vmin is None else vmin
        hi = float(vals[ok].max()) if vmax is None else vmax
    else:
        lo, hi = 0.0, 1.0
    span = hi - lo
    t = np.zeros_like(vals) if span <= 0 else np.clip((vals - lo) / span, 0.0, 1.0)
    out = np.zeros(vals.shape + (3,))
    out[..., 0] = t
    out[..., 1] = 0.4 * (1.0 - np.abs(2.0 * t - 1.0))
    out[..., 2] = 1.0 - t
    out[~ok] = 0.0
    return Image(out)
