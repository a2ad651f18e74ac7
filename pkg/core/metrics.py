"""
Image similarity metrics: SSIM, PSNR, MAE
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from core.errors import ShapeMismatch

DATA_RANGE = 255.0
SSIM_WINDOW = 8
SSIM_C1 = (0.01 * DATA_RANGE) ** 2
SSIM_C2 = (0.03 * DATA_RANGE) ** 2


@dataclass(frozen=True)
class MetricReport:
    ssim: float
    psnr: float  # math.inf for identical images
    mae: float  # fraction of full scale

    @property
    def mae_percent(self):
        return 100.0 * self.mae

    def to_dict(self):
        return {"ssim": self.ssim, "psnr": self.psnr, "mae_percent": self.mae_percent}


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"Image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _gray(image):
    return image.mean(axis=-1) if image.ndim == 3 else image


def ssim(a, b):
    """Mean SSIM over all full 8x8 windows of the channel-mean grayscale images"""
    a, b = _pair(a, b)
    x, y = _gray(a), _gray(b)
    if min(x.shape) < SSIM_WINDOW:
        raise ShapeMismatch(f"Images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} (got {x.shape})")

    mu_x = uniform_filter(x, SSIM_WINDOW)
    mu_y = uniform_filter(y, SSIM_WINDOW)
    var_x = uniform_filter(x * x, SSIM_WINDOW) - mu_x ** 2
    var_y = uniform_filter(y * y, SSIM_WINDOW) - mu_y ** 2
    cov = uniform_filter(x * y, SSIM_WINDOW) - mu_x * mu_y

    s = ((2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)) / (
        (mu_x ** 2 + mu_y ** 2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
    )
    # an even window centered at i spans i-4 .. i+3
    lo = SSIM_WINDOW // 2
    hi = SSIM_WINDOW // 2 - 1
    return float(s[lo:s.shape[0] - hi, lo:s.shape[1] - hi].mean())


def psnr(a, b):
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DATA_RANGE ** 2 / mse)


def mae(a, b):
    """Mean absolute error as a fraction of 255"""
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)) / DATA_RANGE)


def compare_images(a, b):
    return MetricReport(ssim=ssim(a, b), psnr=psnr(a, b), mae=mae(a, b))
