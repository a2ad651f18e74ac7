import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core.errors import ShapeMismatch
from core.metrics import SSIM_C1, SSIM_C2, compare_images, mae, psnr, ssim


def random_image(seed, shape=(48, 64, 3)):
    return np.random.default_rng(seed).integers(0, 256, size=shape).astype(np.uint8)


def windowed_ssim(x, y, win=8):
    """Brute-force mean SSIM over every full win x win window"""
    values = []
    for i in range(x.shape[0] - win + 1):
        for j in range(x.shape[1] - win + 1):
            a = x[i:i + win, j:j + win]
            b = y[i:i + win, j:j + win]
            mu_a, mu_b = a.mean(), b.mean()
            cov = ((a - mu_a) * (b - mu_b)).mean()
            values.append(((2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2))
                          / ((mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (a.var() + b.var() + SSIM_C2)))
    return float(np.mean(values))


class TestIdentity:
    def test_identical_images(self):
        a = random_image(0)
        report = compare_images(a, a.copy())
        assert report.ssim == 1.0
        assert report.psnr == math.inf
        assert report.mae == 0.0
        assert report.mae_percent == 0.0

    def test_report_dict(self):
        a = random_image(1)
        b = np.clip(a.astype(int) + 1, 0, 255).astype(np.uint8)
        d = compare_images(a, b).to_dict()
        assert set(d) == {"ssim", "psnr", "mae_percent"}


class TestClosedForms:
    def test_off_by_one(self):
        a = np.random.default_rng(2).integers(0, 255, size=(32, 32, 3)).astype(np.uint8)
        b = a + 1
        assert psnr(a, b) == pytest.approx(20 * math.log10(255), abs=1e-9)
        assert psnr(a, b) == pytest.approx(48.13, abs=0.005)
        assert mae(a, b) == pytest.approx(1 / 255)

    def test_checkerboard_inverse(self):
        board = (np.indices((32, 32)).sum(axis=0) % 2 * 255).astype(np.uint8)
        a = np.repeat(board[..., None], 3, axis=-1)
        b = 255 - a
        assert mae(a, b) == pytest.approx(1.0)
        assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_constant_images(self):
        p, q = 100.0, 140.0
        a = np.full((16, 16), p)
        b = np.full((16, 16), q)
        expected = (2 * p * q + SSIM_C1) / (p ** 2 + q ** 2 + SSIM_C1)
        assert ssim(a, b) == pytest.approx(expected, rel=1e-12)
        assert ssim(a, b) < 1.0

    def test_anticorrelated_is_negative(self):
        x = random_image(3, shape=(64, 64))
        assert ssim(x, 255 - x) < 0.0

    def test_matches_windowed_oracle(self):
        x = random_image(4, shape=(20, 23)).astype(float)
        y = np.clip(x + np.random.default_rng(5).normal(0, 20, size=x.shape), 0, 255)
        assert ssim(x, y) == pytest.approx(windowed_ssim(x, y), rel=1e-9)

    def test_color_uses_channel_mean(self):
        rgb = random_image(6, shape=(24, 24, 3)).astype(float)
        other = random_image(7, shape=(24, 24, 3)).astype(float)
        assert ssim(rgb, other) == pytest.approx(ssim(rgb.mean(axis=-1), other.mean(axis=-1)), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31), st.integers(min_value=0, max_value=2 ** 31))
def test_symmetry(seed_a, seed_b):
    a, b = random_image(seed_a, (16, 16, 3)), random_image(seed_b, (16, 16, 3))
    assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)
    assert psnr(a, b) == psnr(b, a)
    assert mae(a, b) == mae(b, a)


def test_more_noise_is_worse():
    rng = np.random.default_rng(8)
    base = np.tile(np.linspace(0, 255, 64), (48, 1))
    noise = rng.normal(size=base.shape)
    sigmas = (1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 18.0, 27.0, 40.0, 60.0)
    reports = [compare_images(base, np.clip(base + sigma * noise, 0, 255)) for sigma in sigmas]
    for better, worse in zip(reports, reports[1:]):
        assert better.ssim > worse.ssim
        assert better.psnr > worse.psnr
        assert better.mae < worse.mae


class TestShapes:
    def test_mismatched_shapes(self):
        with pytest.raises(ShapeMismatch):
            compare_images(np.zeros((16, 16, 3)), np.zeros((16, 17, 3)))

    def test_too_small_for_window(self):
        with pytest.raises(ShapeMismatch):
            ssim(np.zeros((7, 30)), np.zeros((7, 30)))
