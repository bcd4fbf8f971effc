"""Evaluation primitives: ROC/AUROC, TPR at fixed FPR, PSNR, SSIM, and exact
empirical Wasserstein distance between equal-size image sets.

Distances (mean_paired_l2, wasserstein_exact) are reported in the 0-255
scale so they are comparable with published per-method perturbation tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate
from scipy.optimize import linear_sum_assignment


@dataclass
class RocCurve:
    """Threshold-sweep ROC: points run from (0, 0) to (1, 1), both
    coordinates non-decreasing; auroc carries trapezoid area (equal to
    P(s+ > s-) + 0.5 P(s+ = s-))."""

    points: list
    auroc: float
    n_pos: int
    n_neg: int


@dataclass
class QualityReport:
    psnr: float
    ssim: float
    l2: float


def _scores(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("empty score set")
    return arr


def roc(pos_scores, neg_scores) -> RocCurve:
    """ROC from a threshold sweep over the union of scores.

    Ties contribute diagonal segments, so the trapezoid AUROC equals the
    probabilistic form with half credit for equal scores.
    """
    pos = _scores(pos_scores)
    neg = _scores(neg_scores)
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    points = [(0.0, 0.0)]
    for th in thresholds:
        tpr = float(np.mean(pos >= th))
        fpr = float(np.mean(neg >= th))
        points.append((fpr, tpr))
    points.append((1.0, 1.0))
    auroc = 0.0
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        auroc += (x1 - x0) * (y0 + y1) / 2.0
    return RocCurve(points=points, auroc=float(auroc), n_pos=pos.size, n_neg=neg.size)


def tpr_at_fpr(curve: RocCurve, fpr_target: float) -> float:
    """TPR at the largest achieved FPR <= target (step convention)."""
    if not (0.0 <= fpr_target <= 1.0):
        raise ValueError("fpr_target must lie in [0, 1]")
    best = 0.0
    for fpr, tpr in curve.points:
        if fpr <= fpr_target:
            best = max(best, tpr)
    return best


def _pair_planes(x, y):
    a = x.data if hasattr(x, "data") else np.asarray(x, dtype=np.float64)
    b = y.data if hasattr(y, "data") else np.asarray(y, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(x, y) -> float:
    """10 log10(1 / MSE) for [0, 1]-scale images; inf for identical inputs."""
    a, b = _pair_planes(x, y)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()

_SSIM_WIN = _gaussian_window()


def ssim(x, y, k1: float = 0.01, k2: float = 0.03, dynamic_range: float = 1.0) -> float:
    """Mean local SSIM, 11x11 Gaussian window sigma=1.5, valid windows only.

    Multi-channel inputs are averaged over channels. Symmetric in (x, y);
    ssim(x, x) == 1 exactly.
    """
    a, b = _pair_planes(x, y)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.shape[0] < 11 or a.shape[1] < 11:
        raise ValueError("image smaller than the 11x11 SSIM window")
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    vals = []
    for ch in range(a.shape[2]):
        vals.append(_ssim_plane(a[:, :, ch], b[:, :, ch], c1, c2))
    return float(np.mean(vals))


def _ssim_plane(a, b, c1, c2):
    pad = 5
    sl = (slice(pad, -pad), slice(pad, -pad))

    def win_mean(z):
        return correlate(z, _SSIM_WIN, mode="constant")[sl]

    mu_a = win_mean(a)
    mu_b = win_mean(b)
    aa = win_mean(a * a) - mu_a * mu_a
    bb = win_mean(b * b) - mu_b * mu_b
    ab = win_mean(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * ab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (aa + bb + c2)
    return float(np.mean(num / den))


def _flatten_255(images) -> np.ndarray:
    flats = []
    for im in images:
        arr = im.data if hasattr(im, "data") else np.asarray(im, dtype=np.float64)
        flats.append(np.asarray(arr, dtype=np.float64).ravel() * 255.0)
    if not flats:
        raise ValueError("empty image set")
    lengths = {f.size for f in flats}
    if len(lengths) != 1:
        raise ValueError("images have mismatched geometry")
    return np.stack(flats)


def mean_paired_l2(set_a, set_b) -> float:
    """Mean over index-paired images of ||a_i - b_i||_2 in the 0-255 scale.

    The identity pairing is a feasible coupling, so this upper-bounds
    wasserstein_exact on the same sets.
    """
    a = _flatten_255(set_a)
    b = _flatten_255(set_b)
    if a.shape != b.shape:
        raise ValueError("sets must have equal counts and geometry")
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


def wasserstein_exact(set_a, set_b) -> float:
    """Empirical 1-Wasserstein (l2 ground cost, 0-255 scale) between two
    equal-size sets, solved by exact optimal assignment."""
    a = _flatten_255(set_a)
    b = _flatten_255(set_b)
    if a.shape[0] != b.shape[0]:
        raise ValueError("sets must have equal counts")
    if a.shape[1] != b.shape[1]:
        raise ValueError("sets must have equal geometry")
    if a.shape[0] > 512:
        raise ValueError("assignment solver limited to 512 images per set")
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    cost = np.sqrt(np.maximum(sq, 0.0))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())
