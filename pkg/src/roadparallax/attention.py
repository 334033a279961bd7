"""Cross-view neighborhood attention with a learned relative bias.

Queries come from the source feature map, keys and values from the
target map (1x1 projections); each output pixel attends over a k x k
dilated neighborhood of itself in the target.  Border support is
truncated and renormalized, so softmax weights sum to one everywhere,
corners included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


def _check_feature_map(name: str, f: np.ndarray) -> np.ndarray:
    a = np.asarray(f, dtype=np.float64)
    if a.ndim != 3:
        raise ShapeMismatch(f"{name} must be (C, H, W), got {a.shape}")
    return a


@dataclass(frozen=True)
class AttentionParams:
    """Projections (C' x C), bias table (k, k, C'), and dilation."""

    w_query: np.ndarray
    w_key: np.ndarray
    w_value: np.ndarray
    bias: np.ndarray
    dilation: int = 1

    def __post_init__(self):
        wq = np.asarray(self.w_query, dtype=np.float64)
        wk = np.asarray(self.w_key, dtype=np.float64)
        wv = np.asarray(self.w_value, dtype=np.float64)
        r = np.asarray(self.bias, dtype=np.float64)
        for name, w in (("w_query", wq), ("w_key", wk), ("w_value", wv)):
            if w.ndim != 2:
                raise ShapeMismatch(f"{name} must be 2-D (C', C), got {w.shape}")
        if wq.shape != wk.shape or wq.shape[0] != wv.shape[0]:
            raise ShapeMismatch("projection shapes disagree")
        if r.ndim != 3 or r.shape[0] != r.shape[1]:
            raise ShapeMismatch(f"bias must be (k, k, C'), got {r.shape}")
        if r.shape[0] % 2 == 0:
            raise ShapeMismatch("attention field k must be odd")
        if r.shape[2] != wv.shape[0]:
            raise ShapeMismatch("bias channel count must match value projection")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")
        object.__setattr__(self, "w_query", wq)
        object.__setattr__(self, "w_key", wk)
        object.__setattr__(self, "w_value", wv)
        object.__setattr__(self, "bias", r)

    @property
    def field(self) -> int:
        return self.bias.shape[0]

    @property
    def out_channels(self) -> int:
        return self.w_value.shape[0]


def default_params(channels: int, out_channels: int, field: int = 19, dilation: int = 1, seed: int = 0) -> AttentionParams:
    """Gaussian-initialized parameters, deterministic in `seed`."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(channels)
    return AttentionParams(
        w_query=rng.normal(0.0, scale, (out_channels, channels)),
        w_key=rng.normal(0.0, scale, (out_channels, channels)),
        w_value=rng.normal(0.0, scale, (out_channels, channels)),
        bias=rng.normal(0.0, 0.02, (field, field, out_channels)),
        dilation=dilation,
    )


def cross_attention_forward(
    f_source: np.ndarray,
    f_target: np.ndarray,
    params: AttentionParams,
    return_weights: bool = False,
):
    """Attend source queries over target neighborhoods.

    f_source, f_target: (C, H, W).  Output is (C', H, W); with
    return_weights=True also the (k*k, H, W) softmax weights (zero for
    out-of-frame neighbors), in row-major offset order.

    y_o = sum_p w_p (v_p + r_{o,p}) over the in-frame p of the k x k
    dilated neighborhood; logits are q_o . k_p, max-subtracted per
    pixel before the softmax.
    """
    fs = _check_feature_map("f_source", f_source)
    ft = _check_feature_map("f_target", f_target)
    if fs.shape != ft.shape:
        raise ShapeMismatch(f"feature maps disagree: {fs.shape} vs {ft.shape}")
    if fs.shape[0] != params.w_query.shape[1]:
        raise ShapeMismatch(
            f"feature channels {fs.shape[0]} != projection input {params.w_query.shape[1]}"
        )
    C, H, W = fs.shape
    k = params.field
    half = k // 2
    dil = params.dilation

    q = np.tensordot(params.w_query, fs, axes=([1], [0]))
    key = np.tensordot(params.w_key, ft, axes=([1], [0]))
    val = np.tensordot(params.w_value, ft, axes=([1], [0]))

    n_off = k * k

    def _slices(dy: int, dx: int):
        ys = slice(max(dy, 0), H + min(dy, 0))
        yr = slice(max(-dy, 0), H + min(-dy, 0))
        xs = slice(max(dx, 0), W + min(dx, 0))
        xr = slice(max(-dx, 0), W + min(-dx, 0))
        return ys, yr, xs, xr

    offsets = [
        (oy * dil, ox * dil)
        for oy in range(-half, half + 1)
        for ox in range(-half, half + 1)
    ]

    # neighbor of output pixel p is p + (dy, dx) in the target
    logits = np.full((n_off, H, W), -np.inf)
    for i, (dy, dx) in enumerate(offsets):
        ys, yr, xs, xr = _slices(dy, dx)
        logits[i, yr, xr] = np.einsum("chw,chw->hw", q[:, yr, xr], key[:, ys, xs])

    m = logits.max(axis=0)
    w = np.exp(logits - m)
    w /= w.sum(axis=0)

    r_flat = params.bias.reshape(n_off, -1)  # row-major offsets
    out = np.zeros((params.out_channels, H, W))
    for i, (dy, dx) in enumerate(offsets):
        ys, yr, xs, xr = _slices(dy, dx)
        shifted = np.zeros((params.out_channels, H, W))
        shifted[:, yr, xr] = val[:, ys, xs]
        out += w[i][None, :, :] * (shifted + r_flat[i][:, None, None])

    if return_weights:
        return out, w
    return out
