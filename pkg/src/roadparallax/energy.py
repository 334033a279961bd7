"""Photometric, sparse-supervision, and smoothness energies.

These score a gamma field (through the target reconstruction it
implies) the way an optimization or training loop would: lower is
better, exact agreement scores zero photometric loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, GridMismatch
from .geometry import FlowField, ScalarMap, require_same_grid
from .imaging import Image

# SSIM stabilizers for intensities normalized to [0, 1].
_C1 = 0.01**2
_C2 = 0.03**2


@dataclass(frozen=True)
class EnergyWeights:
    alpha: float = 0.85
    beta: float = 1.0
    lambda_p: float = 1.0
    lambda_s: float = 1.0
    lambda_sm: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if min(self.lambda_p, self.lambda_s, self.lambda_sm) < 0:
            raise ValueError("energy weights must be non-negative")


@dataclass(frozen=True)
class EnergyBreakdown:
    photometric: float
    sparse: float
    smoothness: float
    total: float

    def as_dict(self) -> dict:
        return {
            "photometric": self.photometric,
            "sparse": self.sparse,
            "smoothness": self.smoothness,
            "total": self.total,
        }


def _box_mean3(a: np.ndarray) -> np.ndarray:
    """3x3 mean with windows clipped at the borders (no padding bias)."""
    H, W = a.shape
    c = np.zeros((H + 1, W + 1))
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=c[1:, 1:])
    y0 = np.maximum(np.arange(H) - 1, 0)
    y1 = np.minimum(np.arange(H) + 2, H)
    x0 = np.maximum(np.arange(W) - 1, 0)
    x1 = np.minimum(np.arange(W) + 2, W)
    sums = c[y1[:, None], x1[None, :]] - c[y0[:, None], x1[None, :]] \
        - c[y1[:, None], x0[None, :]] + c[y0[:, None], x0[None, :]]
    counts = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return sums / counts


def ssim_map(a: Image, b: Image) -> np.ndarray:
    """Per-pixel SSIM over a 3x3 box window, averaged across channels.

    Identical inputs give exactly 1.0 everywhere; values always lie in
    [-1, 1] thanks to the stabilizers.
    """
    if a.shape != b.shape or a.channels != b.channels:
        raise GridMismatch("images must share grid and channel count")
    acc = np.zeros(a.shape)
    for ch in range(a.channels):
        x = a.data[..., ch]
        y = b.data[..., ch]
        mu_x = _box_mean3(x)
        mu_y = _box_mean3(y)
        var_x = _box_mean3(x * x) - mu_x * mu_x
        var_y = _box_mean3(y * y) - mu_y * mu_y
        cov = _box_mean3(x * y) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + _C1) * (2.0 * cov + _C2)
        den = (mu_x * mu_x + mu_y * mu_y + _C1) * (var_x + var_y + _C2)
        acc += num / den
    return acc / a.channels


def photometric_energy(
    target: Image, candidate: Image, mask: np.ndarray, alpha: float = 0.85
) -> float:
    """alpha (1 - SSIM)/2 + (1 - alpha) L1, averaged over masked pixels."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if mask.shape != target.shape:
        raise GridMismatch("mask must match the image grid")
    if not mask.any():
        raise EmptyMask("photometric energy over an empty mask")
    ssim = ssim_map(target, candidate)
    l1 = np.mean(np.abs(target.data - candidate.data), axis=2)
    loss = alpha * (1.0 - ssim) / 2.0 + (1.0 - alpha) * l1
    return float(loss[mask].mean())


def sparse_gamma_energy(pred: ScalarMap, reference: ScalarMap) -> float:
    """Sum of |gamma - gamma*| over jointly valid cells (0 if none).

    A sum, not a mean: sparse supervision contributes per covered cell.
    """
    require_same_grid(pred, reference)
    joint = pred.valid & reference.valid
    if not joint.any():
        return 0.0
    return float(np.abs(pred.values[joint] - reference.values[joint]).sum())


def smoothness_energy(flow: FlowField, reference: Image, beta: float = 1.0) -> float:
    """Edge-weighted second-order smoothness of a flow field.

    Sum over the common interior (both axes' stencils inside the grid)
    of |second difference|^2 * exp(-beta |grad I|) per axis, with the
    image gradient taken centrally on the channel-mean intensity.  Cells
    whose 3-cell stencil touches invalid flow are skipped.  Affine flow
    scores exactly zero.
    """
    if flow.shape != reference.shape:
        raise GridMismatch("flow and reference image must share a grid")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    H, W = flow.shape
    if H < 3 or W < 3:
        return 0.0
    u = flow.values
    ok = flow.valid
    gray = reference.gray()

    # horizontal stencil
    d2x = u[1:-1, :-2] - 2.0 * u[1:-1, 1:-1] + u[1:-1, 2:]
    ok_x = ok[1:-1, :-2] & ok[1:-1, 1:-1] & ok[1:-1, 2:]
    gx = 0.5 * (gray[1:-1, 2:] - gray[1:-1, :-2])
    wx = np.exp(-beta * np.abs(gx))
    ex = np.sum((d2x**2).sum(axis=2) * wx * ok_x)

    # vertical stencil
    d2y = u[:-2, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[2:, 1:-1]
    ok_y = ok[:-2, 1:-1] & ok[1:-1, 1:-1] & ok[2:, 1:-1]
    gy = 0.5 * (gray[2:, 1:-1] - gray[:-2, 1:-1])
    wy = np.exp(-beta * np.abs(gy))
    ey = np.sum((d2y**2).sum(axis=2) * wy * ok_y)

    return float(ex + ey)


def total_energy(
    target: Image,
    candidate: Image,
    mask: np.ndarray,
    pred_gamma: ScalarMap,
    ref_gamma: ScalarMap,
    flow: FlowField,
    weights: EnergyWeights = EnergyWeights(),
) -> EnergyBreakdown:
    """Weighted sum lambda_p E_p + lambda_s E_s + lambda_sm E_sm."""
    e_p = photometric_energy(target, candidate, mask, weights.alpha)
    e_s = sparse_gamma_energy(pred_gamma, ref_gamma)
    e_sm = smoothness_energy(flow, target, weights.beta)
    total = weights.lambda_p * e_p + weights.lambda_s * e_s + weights.lambda_sm * e_sm
    return EnergyBreakdown(e_p, e_s, e_sm, total)
