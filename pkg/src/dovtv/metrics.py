"""Restoration quality: PSNR, SSIM and CIEDE2000.

All three work on the float path (no 8-bit quantization). PSNR is reported on
the 8-bit scale, SSIM is the mean of the per-channel SSIM with the usual
11x11 Gaussian window, and CIEDE2000 is the mean per-pixel colour difference
after sRGB (D65) to CIELAB conversion.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from ._validation import DimensionError, check_image, check_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# IEC 61966-2-1 linear sRGB -> XYZ, and the D65 white point (Y = 1)
XYZ_FROM_RGB = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


@dataclass(frozen=True)
class MetricsReport:
    psnr: float
    ssim: float
    ciede: float

    def format(self):
        """``PSNR/SSIM/CIEDE`` with one, two and two decimals, e.g. ``23.3/0.71/8.27``."""
        psnr = "inf" if math.isinf(self.psnr) else f"{self.psnr:.1f}"
        return f"{psnr}/{self.ssim:.2f}/{self.ciede:.2f}"


def _pair(ref, test):
    a = check_image(ref, "ref")
    b = check_image(test, "test")
    check_same_shape(a, b)
    return a, b


def psnr(ref, test):
    """Peak signal-to-noise ratio in dB on the 8-bit scale; ``inf`` for identical images."""
    a, b = _pair(ref, test)
    mse = float(np.mean(((a - b) * 255.0) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = (size - 1) / 2.0
    x = np.arange(size) - r
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def _filter_valid(x, w):
    r = (len(w) - 1) // 2
    out = correlate1d(correlate1d(x, w, axis=0, mode="nearest"), w, axis=1, mode="nearest")
    return out[r:-r, r:-r] if r else out


def ssim_channel(x, y, data_range=1.0):
    """Mean SSIM of two planes over all window positions fully inside the image."""
    w = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx, my = _filter_valid(x, w), _filter_valid(y, w)
    sxx = _filter_valid(x * x, w) - mx * mx
    syy = _filter_valid(y * y, w) - my * my
    sxy = _filter_valid(x * y, w) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(ref, test, data_range=1.0):
    """Structural similarity averaged over the three colour channels."""
    a, b = _pair(ref, test)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")
    return float(np.mean([ssim_channel(a[..., c], b[..., c], data_range) for c in range(3)]))


def srgb_to_linear(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)


def rgb_to_lab(rgb):
    """sRGB in [0, 1] (last axis) to CIELAB under D65."""
    xyz = srgb_to_linear(rgb) @ XYZ_FROM_RGB.T / WHITE_D65
    delta = 6.0 / 29.0
    f = np.where(xyz > delta**3, np.cbrt(xyz), xyz / (3 * delta**2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def delta_e_2000(lab1, lab2, kL=1.0, kC=1.0, kH=1.0):
    """CIEDE2000 colour difference between CIELAB arrays (last axis = L, a, b)."""
    lab1 = np.asarray(lab1, dtype=np.float64)
    lab2 = np.asarray(lab2, dtype=np.float64)
    L1, a1, b1 = lab1[..., 0], lab1[..., 1], lab1[..., 2]
    L2, a2, b2 = lab2[..., 0], lab2[..., 1], lab2[..., 2]

    c_bar = 0.5 * (np.hypot(a1, b1) + np.hypot(a2, b2))
    c7 = c_bar**7
    g = 0.5 * (1.0 - np.sqrt(c7 / (c7 + 25.0**7)))
    a1p, a2p = (1.0 + g) * a1, (1.0 + g) * a2
    c1p, c2p = np.hypot(a1p, b1), np.hypot(a2p, b2)
    h1p = np.degrees(np.arctan2(b1, a1p)) % 360.0
    h2p = np.degrees(np.arctan2(b2, a2p)) % 360.0

    dLp = L2 - L1
    dCp = c2p - c1p
    cprod = c1p * c2p
    dh = h2p - h1p
    dh = np.where(dh > 180.0, dh - 360.0, dh)
    dh = np.where(dh < -180.0, dh + 360.0, dh)
    dh = np.where(cprod == 0.0, 0.0, dh)
    dHp = 2.0 * np.sqrt(cprod) * np.sin(np.radians(dh) / 2.0)

    Lbar = 0.5 * (L1 + L2)
    Cbar = 0.5 * (c1p + c2p)
    hsum = h1p + h2p
    hbar = np.where(
        np.abs(h1p - h2p) <= 180.0,
        hsum / 2.0,
        np.where(hsum < 360.0, (hsum + 360.0) / 2.0, (hsum - 360.0) / 2.0),
    )
    hbar = np.where(cprod == 0.0, hsum, hbar)

    t = (
        1.0
        - 0.17 * np.cos(np.radians(hbar - 30.0))
        + 0.24 * np.cos(np.radians(2.0 * hbar))
        + 0.32 * np.cos(np.radians(3.0 * hbar + 6.0))
        - 0.20 * np.cos(np.radians(4.0 * hbar - 63.0))
    )
    dtheta = 30.0 * np.exp(-(((hbar - 275.0) / 25.0) ** 2))
    cbar7 = Cbar**7
    rc = 2.0 * np.sqrt(cbar7 / (cbar7 + 25.0**7))
    sl = 1.0 + 0.015 * (Lbar - 50.0) ** 2 / np.sqrt(20.0 + (Lbar - 50.0) ** 2)
    sc = 1.0 + 0.045 * Cbar
    sh = 1.0 + 0.015 * Cbar * t
    rt = -np.sin(np.radians(2.0 * dtheta)) * rc

    tl = dLp / (kL * sl)
    tc = dCp / (kC * sc)
    th = dHp / (kH * sh)
    return np.sqrt(tl**2 + tc**2 + th**2 + rt * tc * th)


def ciede2000(ref, test):
    """Mean CIEDE2000 difference over all pixels."""
    a, b = _pair(ref, test)
    return float(np.mean(delta_e_2000(rgb_to_lab(a), rgb_to_lab(b))))


def evaluate(ref, test):
    return MetricsReport(psnr(ref, test), ssim(ref, test), ciede2000(ref, test))
