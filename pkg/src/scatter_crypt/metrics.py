"""Image-quality scores: SSIM, plus MSE/PSNR."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, ValidationError, WindowTooLarge


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    data_range: float = 1.0
    k1: float = 0.01
    k2: float = 0.03

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValidationError("SSIM window side must be odd and at least 3")
        if not (self.data_range > 0 and self.k1 > 0 and self.k2 > 0 and self.sigma > 0):
            raise ValidationError("SSIM data range, sigma and constants must be positive")

    def weights(self) -> np.ndarray:
        r = np.arange(self.window) - self.window // 2
        g = np.exp(-(r**2) / (2 * self.sigma**2))
        w = np.outer(g, g)
        return w / w.sum()


def normalize(img) -> np.ndarray:
    """Min-max rescale to [0, 1]; constant images map to zeros."""
    a = np.asarray(img, dtype=np.float64)
    lo, hi = a.min(), a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def ssim_map(a, b, params: SsimParams = SsimParams()) -> np.ndarray:
    """Per-window SSIM over all fully-contained (valid) windows."""
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise DimensionMismatch("SSIM expects 2-D images")
    if params.window > min(a.shape):
        raise WindowTooLarge(f"window {params.window} exceeds image shape {a.shape}")
    w = params.weights()
    wa = sliding_window_view(a, w.shape)
    wb = sliding_window_view(b, w.shape)
    mu_a = np.einsum("ijkl,kl->ij", wa, w)
    mu_b = np.einsum("ijkl,kl->ij", wb, w)
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = np.einsum("ijkl,kl->ij", da * da, w)
    var_b = np.einsum("ijkl,kl->ij", db * db, w)
    cov = np.einsum("ijkl,kl->ij", da * db, w)
    c1 = (params.k1 * params.data_range) ** 2
    c2 = (params.k2 * params.data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, params: SsimParams = SsimParams()) -> float:
    return float(np.mean(ssim_map(a, b, params)))


def mse_psnr(a, b, data_range: float = 1.0) -> tuple[float, float]:
    """MSE and PSNR in dB; PSNR is ``inf`` for identical images."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(data_range**2 / mse)
    return mse, psnr
