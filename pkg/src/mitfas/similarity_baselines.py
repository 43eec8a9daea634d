# src/mitfas/similarity_baselines.py
"""Conventional patch-similarity measures used as baselines against mutual information."""
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from mitfas.errors import InputError, ShapeMismatchError, UndefinedSimilarityError
from mitfas.mi_core import as_patch

PIXEL_MAX = 255.0
SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a, b = as_patch(a), as_patch(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(a.shape, b.shape)
    return a.astype(np.float64), b.astype(np.float64)


def euclidean_distance(a, b) -> float:
    x, y = _pair(a, b)
    return math.sqrt(math.fsum(((x - y) ** 2).ravel().tolist()))


def cosine_similarity(a, b) -> float:
    x, y = _pair(a, b)
    norm_x = math.sqrt(math.fsum((x * x).ravel().tolist()))
    norm_y = math.sqrt(math.fsum((y * y).ravel().tolist()))
    if norm_x == 0 or norm_y == 0:
        raise UndefinedSimilarityError("Cosine similarity is undefined for an all-zero patch")
    return math.fsum((x * y).ravel().tolist()) / (norm_x * norm_y)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; math.inf for identical patches."""
    x, y = _pair(a, b)
    mse = math.fsum(((x - y) ** 2).ravel().tolist()) / x.size
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(PIXEL_MAX * PIXEL_MAX / mse)


def ssim(a, b) -> float:
    """Mean SSIM over uniform 8x8 windows at step 1."""
    x, y = _pair(a, b)
    if min(x.shape) < SSIM_WINDOW:
        raise InputError(f"SSIM needs patches of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape[1]}x{x.shape[0]}")
    # constants to stabilize the division with weak denominator
    c1 = (SSIM_K1 * PIXEL_MAX) ** 2
    c2 = (SSIM_K2 * PIXEL_MAX) ** 2

    wx = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
    wy = sliding_window_view(y, (SSIM_WINDOW, SSIM_WINDOW))
    mu_x = wx.mean(axis=(-2, -1))
    mu_y = wy.mean(axis=(-2, -1))
    var_x = ((wx - mu_x[..., None, None]) ** 2).mean(axis=(-2, -1))
    var_y = ((wy - mu_y[..., None, None]) ** 2).mean(axis=(-2, -1))
    cov = ((wx - mu_x[..., None, None]) * (wy - mu_y[..., None, None])).mean(axis=(-2, -1))

    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
    return float(np.mean(ssim_map))
