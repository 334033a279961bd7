"""NumPy reference implementations of the hot kernels.

The compiled extension in `_fast.pyx` mirrors these exactly (same
arithmetic order for the bilinear path, same scan order and tie-breaking
for block matching).  This module is the fallback when the extension is
unavailable and the ground truth the extension is tested against.
"""

import numpy as np

BACKEND_NAME = "numpy"


def bilinear_gather(data: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Sample (H, W, C) data at float positions; out-of-frame is invalid.

    A sample is valid iff x in [0, W-1] and y in [0, H-1].  Gather
    indices are clamped and the weight of the clamped tap is zero, so
    integer positions reproduce the stored values bitwise.

    Returns (values (N, C) with zeros at invalid samples, valid (N,) bool).
    """
    H, W, C = data.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    valid = (xs >= 0.0) & (xs <= W - 1.0) & (ys >= 0.0) & (ys <= H - 1.0)

    x0 = np.floor(np.where(valid, xs, 0.0))
    y0 = np.floor(np.where(valid, ys, 0.0))
    fx = np.where(valid, xs, 0.0) - x0
    fy = np.where(valid, ys, 0.0) - y0

    xi0 = x0.astype(np.int64)
    yi0 = y0.astype(np.int64)
    xi1 = np.minimum(xi0 + 1, W - 1)
    yi1 = np.minimum(yi0 + 1, H - 1)
    xi0 = np.minimum(xi0, W - 1)
    yi0 = np.minimum(yi0, H - 1)

    v00 = data[yi0, xi0]
    v01 = data[yi0, xi1]
    v10 = data[yi1, xi0]
    v11 = data[yi1, xi1]

    fxc = fx[:, None]
    fyc = fy[:, None]
    top = v00 * (1.0 - fxc) + v01 * fxc
    bot = v10 * (1.0 - fxc) + v11 * fxc
    out = top * (1.0 - fyc) + bot * fyc
    out[~valid] = 0.0
    return out, valid


def _box_sum(a: np.ndarray, half: int) -> np.ndarray:
    """Sum over the (2*half+1)^2 window centered per pixel.

    Border pixels (window not fully inside) are left at +inf; callers
    only read the interior.
    """
    H, W = a.shape
    size = 2 * half + 1
    c = np.zeros((H + 1, W + 1))
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=c[1:, 1:])
    s = c[size:, size:] - c[:-size, size:] - c[size:, :-size] + c[:-size, :-size]
    out = np.full((H, W), np.inf)
    out[half : H - half, half : W - half] = s
    return out


def sad_block_match(
    src: np.ndarray,
    tgt: np.ndarray,
    patch: int,
    radius: int,
    contrast_threshold: float,
):
    """Dense patch match of tgt against src with SAD cost.

    cost(p, d) = mean_q |tgt[p + q] - src[p - d + q]| over the patch,
    minimized over |d|_inf <= radius (ties: smallest (dy, dx) wins, row
    major).  A parabolic fit over the two cost neighbors per axis
    refines d by at most half a pixel.  Cells whose cost spread
    (max - min over the window) stays under `contrast_threshold`, and
    cells whose patch or search window leaves the image, are invalid.

    Returns (flow (H, W, 2) with (u_x, u_y), valid (H, W) bool).
    """
    H, W = src.shape
    half = patch // 2
    margin = half + radius
    flow = np.zeros((H, W, 2))
    valid = np.zeros((H, W), dtype=bool)
    ny = H - 2 * margin
    nx = W - 2 * margin
    if ny <= 0 or nx <= 0:
        return flow, valid
    win = 2 * radius + 1
    area = float(patch * patch)
    sl = slice(margin, margin + ny), slice(margin, margin + nx)

    costs = np.empty((win, win, ny, nx))
    shifted = np.zeros_like(src)
    for iy, dy in enumerate(range(-radius, radius + 1)):
        for ix, dx in enumerate(range(-radius, radius + 1)):
            # shifted[p] = src[p - d]; edges that the restricted region
            # never reads are left stale on purpose
            ys = slice(max(dy, 0), H + min(dy, 0))
            yr = slice(max(-dy, 0), H + min(-dy, 0))
            xs = slice(max(dx, 0), W + min(dx, 0))
            xr = slice(max(-dx, 0), W + min(-dx, 0))
            shifted[ys, xs] = src[yr, xr]
            costs[iy, ix] = _box_sum(np.abs(tgt - shifted), half)[sl] / area

    flat = costs.reshape(win * win, ny, nx)
    best = np.argmin(flat, axis=0)
    iy, ix = np.divmod(best, win)
    cmin = np.min(flat, axis=0)
    cmax = np.max(flat, axis=0)

    gy, gx = np.indices((ny, nx))
    b = flat[best, gy, gx]

    def _subpixel(idx, lo_cost, hi_cost):
        den = lo_cost - 2.0 * b + hi_cost
        num = 0.5 * (lo_cost - hi_cost)
        inner = (idx > 0) & (idx < win - 1) & (den > 1e-12)
        d = np.where(inner, num / np.where(inner, den, 1.0), 0.0)
        return np.clip(d, -0.5, 0.5)

    ix_lo = np.maximum(ix - 1, 0)
    ix_hi = np.minimum(ix + 1, win - 1)
    dx_sub = _subpixel(ix, costs[iy, ix_lo, gy, gx], costs[iy, ix_hi, gy, gx])
    iy_lo = np.maximum(iy - 1, 0)
    iy_hi = np.minimum(iy + 1, win - 1)
    dy_sub = _subpixel(iy, costs[iy_lo, ix, gy, gx], costs[iy_hi, ix, gy, gx])

    flow[sl[0], sl[1], 0] = (ix - radius) + dx_sub
    flow[sl[0], sl[1], 1] = (iy - radius) + dy_sub
    valid[sl] = (cmax - cmin) >= contrast_threshold
    flow[~valid] = 0.0
    return flow, valid
