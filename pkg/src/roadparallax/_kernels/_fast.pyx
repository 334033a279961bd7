# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot kernels.

Semantics mirror `_ref.py`: identical arithmetic order in the bilinear
path (the build disables FP contraction so results match bitwise) and
identical scan order / tie-breaking in the block matcher.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def bilinear_gather(double[:, :, ::1] data, double[::1] xs, double[::1] ys):
    cdef Py_ssize_t H = data.shape[0]
    cdef Py_ssize_t W = data.shape[1]
    cdef Py_ssize_t C = data.shape[2]
    cdef Py_ssize_t N = xs.shape[0]

    out_arr = np.zeros((N, C), dtype=np.float64)
    valid_arr = np.zeros(N, dtype=np.uint8)
    cdef double[:, ::1] out = out_arr
    cdef unsigned char[::1] valid = valid_arr

    cdef Py_ssize_t i, c, xi0, yi0, xi1, yi1
    cdef double x, y, fx, fy, top, bot

    for i in range(N):
        x = xs[i]
        y = ys[i]
        if x < 0.0 or x > W - 1.0 or y < 0.0 or y > H - 1.0:
            continue
        valid[i] = 1
        xi0 = <Py_ssize_t> x
        yi0 = <Py_ssize_t> y
        if xi0 > W - 1:
            xi0 = W - 1
        if yi0 > H - 1:
            yi0 = H - 1
        fx = x - <double> xi0
        fy = y - <double> yi0
        xi1 = xi0 + 1
        yi1 = yi0 + 1
        if xi1 > W - 1:
            xi1 = W - 1
        if yi1 > H - 1:
            yi1 = H - 1
        for c in range(C):
            top = data[yi0, xi0, c] * (1.0 - fx) + data[yi0, xi1, c] * fx
            bot = data[yi1, xi0, c] * (1.0 - fx) + data[yi1, xi1, c] * fx
            out[i, c] = top * (1.0 - fy) + bot * fy
    return out_arr, valid_arr.astype(bool)


def sad_block_match(
    double[:, ::1] src,
    double[:, ::1] tgt,
    int patch,
    int radius,
    double contrast_threshold,
):
    cdef Py_ssize_t H = src.shape[0]
    cdef Py_ssize_t W = src.shape[1]
    cdef int half = patch // 2
    cdef int margin = half + radius
    cdef int win = 2 * radius + 1
    cdef double area = <double> (patch * patch)

    flow_arr = np.zeros((H, W, 2), dtype=np.float64)
    valid_arr = np.zeros((H, W), dtype=np.uint8)
    cdef double[:, :, ::1] flow = flow_arr
    cdef unsigned char[:, ::1] valid = valid_arr

    cdef Py_ssize_t ny = H - 2 * margin
    cdef Py_ssize_t nx = W - 2 * margin
    if ny <= 0 or nx <= 0:
        return flow_arr, valid_arr.astype(bool)

    # one cost plane per displacement, filled with sliding-window sums
    # and kept around for the parabolic refinement; same footprint as
    # the reference implementation's cost volume
    vol_arr = np.empty((win * win, ny, nx), dtype=np.float64)
    cdef double[:, :, ::1] vol = vol_arr
    ad_arr = np.zeros((H, W), dtype=np.float64)
    rs_arr = np.zeros((H, W), dtype=np.float64)
    cs_arr = np.zeros(W, dtype=np.float64)
    best_arr = np.zeros((ny, nx), dtype=np.float64)
    cmax_arr = np.zeros((ny, nx), dtype=np.float64)
    bidx_arr = np.zeros((ny, nx), dtype=np.int32)
    cdef double[:, ::1] ad = ad_arr
    cdef double[:, ::1] rs = rs_arr
    cdef double[::1] cs = cs_arr
    cdef double[:, ::1] best = best_arr
    cdef double[:, ::1] cmax = cmax_arr
    cdef int[:, ::1] bidx = bidx_arr

    cdef Py_ssize_t y, x, k
    cdef int iy, ix, idx, biy, bix
    cdef int dy, dx
    cdef double diff, s, c, b, lo, hi, den, sub_x, sub_y

    idx = 0
    for iy in range(win):
        dy = iy - radius
        for ix in range(win):
            dx = ix - radius
            # |tgt - shifted src| over the rows/columns any patch reads
            for y in range(radius, H - radius):
                for x in range(radius, W - radius):
                    diff = tgt[y, x] - src[y - dy, x - dx]
                    ad[y, x] = diff if diff >= 0.0 else -diff
            # horizontal running window of width `patch`
            for y in range(radius, H - radius):
                s = 0.0
                for x in range(radius, radius + patch):
                    s += ad[y, x]
                rs[y, margin] = s
                for x in range(margin + 1, W - margin):
                    s += ad[y, x + half] - ad[y, x - half - 1]
                    rs[y, x] = s
            # vertical running window completes the box sum
            for x in range(margin, W - margin):
                s = 0.0
                for y in range(radius, radius + patch):
                    s += rs[y, x]
                cs[x] = s
                vol[idx, 0, x - margin] = s / area
            for y in range(margin + 1, H - margin):
                for x in range(margin, W - margin):
                    cs[x] += rs[y + half, x] - rs[y - half - 1, x]
                    vol[idx, y - margin, x - margin] = cs[x] / area
            # running arg-min/max in scan order: ties keep the first
            # displacement, matching the reference argmin
            if idx == 0:
                for y in range(ny):
                    for x in range(nx):
                        best[y, x] = vol[0, y, x]
                        cmax[y, x] = vol[0, y, x]
            else:
                for y in range(ny):
                    for x in range(nx):
                        c = vol[idx, y, x]
                        if c < best[y, x]:
                            best[y, x] = c
                            bidx[y, x] = idx
                        if c > cmax[y, x]:
                            cmax[y, x] = c
            idx += 1

    for y in range(ny):
        for x in range(nx):
            b = best[y, x]
            if cmax[y, x] - b < contrast_threshold:
                continue
            valid[margin + y, margin + x] = 1
            k = bidx[y, x]
            biy = <int> (k // win)
            bix = <int> (k % win)
            sub_x = 0.0
            if 0 < bix < win - 1:
                lo = vol[k - 1, y, x]
                hi = vol[k + 1, y, x]
                den = lo - 2.0 * b + hi
                if den > 1e-12:
                    sub_x = 0.5 * (lo - hi) / den
                    if sub_x > 0.5:
                        sub_x = 0.5
                    elif sub_x < -0.5:
                        sub_x = -0.5
            sub_y = 0.0
            if 0 < biy < win - 1:
                lo = vol[k - win, y, x]
                hi = vol[k + win, y, x]
                den = lo - 2.0 * b + hi
                if den > 1e-12:
                    sub_y = 0.5 * (lo - hi) / den
                    if sub_y > 0.5:
                        sub_y = 0.5
                    elif sub_y < -0.5:
                        sub_y = -0.5
            flow[margin + y, margin + x, 0] = (bix - radius) + sub_x
            flow[margin + y, margin + x, 1] = (biy - radius) + sub_y

    return flow_arr, valid_arr.astype(bool)
