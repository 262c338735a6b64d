"""Forward models: opponent-channel noise, blur, masks and a synthetic
isoluminant test image.

Noise uses numpy's PCG64 bit generator with its standard-normal sampler, so a
seed reproduces the same realization on any platform.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_image, check_scalar
from .color import OPPONENT, OPPONENT_INV, opponent_forward, opponent_inverse
from .image import from_flat, to_flat
from .operators import BlurKernel, blur_apply, mask_apply

KINDS = ("opponent_noise", "blur", "mask")


@dataclass
class DegradationSpec:
    kind: str
    sigma_8bit: float = 0.0
    seed: int = 0
    kernel: BlurKernel | None = None
    mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation kind {self.kind!r}")
        check_scalar(self.sigma_8bit, "sigma_8bit", low=0.0)
        if self.kind == "blur" and self.kernel is None:
            raise ValueError("blur degradation needs a kernel")
        if self.kind == "mask" and self.mask is None:
            raise ValueError("mask degradation needs a mask")
        if self.kind != "blur" and self.kernel is not None:
            raise ValueError(f"{self.kind} degradation takes no kernel")
        if self.kind != "mask" and self.mask is not None:
            raise ValueError(f"{self.kind} degradation takes no mask")

    def apply(self, img):
        return degrade(img, self)


def add_opponent_noise(img, sigma_8bit, seed):
    """Add i.i.d. Gaussian noise of std ``sigma_8bit/255`` to the two chromatic
    opponent channels, leaving lightness untouched. No clamping."""
    arr = check_image(img)
    sigma = check_scalar(sigma_8bit, "sigma_8bit", low=0.0) / 255.0
    if sigma == 0.0:
        return arr.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    o = opponent_forward(arr)
    noise = rng.standard_normal(arr.shape[:2] + (2,))
    o[..., 1:] += sigma * noise
    return opponent_inverse(o)


def noise_covariance_rgb(sigma):
    """RGB covariance of opponent noise ``diag(0, sigma^2, sigma^2)``."""
    sigma = check_scalar(sigma, "sigma", low=0.0)
    return OPPONENT_INV @ np.diag([0.0, sigma**2, sigma**2]) @ OPPONENT_INV.T


def apply_blur(img, kernel):
    arr = check_image(img)
    h, w = arr.shape[:2]
    return from_flat(blur_apply(to_flat(arr), kernel, w, h), w, h)


def apply_mask(img, mask):
    """Zero the unobserved pixels (the forward model of inpainting)."""
    arr = check_image(img)
    h, w = arr.shape[:2]
    return from_flat(mask_apply(to_flat(arr), mask), w, h)


def degrade(img, spec):
    if spec.kind == "opponent_noise":
        return add_opponent_noise(img, spec.sigma_8bit, spec.seed)
    if spec.kind == "blur":
        out = apply_blur(img, spec.kernel)
    else:
        out = apply_mask(img, spec.mask)
    if spec.sigma_8bit:
        out = add_opponent_noise(out, spec.sigma_8bit, spec.seed)
    return out


# chroma anchors in the (o2, o3) plane
_BLUE = OPPONENT[1:] @ np.array([0.0, 0.0, 1.0])
_GREEN = OPPONENT[1:] @ np.array([0.0, 1.0, 0.0])
_CYAN = OPPONENT[1:] @ np.array([0.0, 1.0, 1.0])


def make_synthetic_isoluminant(width=64, height=64, lightness=0.5):
    """Isoluminant test image made of affine colour ramps between blue and green.

    Lightness is constant. The image is split into four rectangles (a 2x2
    grid); within each, both chromatic opponent coordinates are affine in the
    pixel position, and neighbouring rectangles jump to different ramps, so
    the only edges are colour edges.
    """
    if width < 8 or height < 8:
        raise ValueError("synthetic image needs at least 8x8 pixels")
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    xn = x / (width - 1)
    yn = y / (height - 1)
    left = x < width // 2
    top = y < height // 2
    # chroma = a + b*xn + c*yn per quadrant, built from blue/green/cyan chroma
    ramps = {
        (True, True): (0.30 * _BLUE, 0.25 * (_GREEN - _BLUE), 0.05 * _GREEN),
        (False, True): (0.35 * _GREEN, 0.20 * (_BLUE - _GREEN), -0.05 * _BLUE),
        (True, False): (0.20 * _CYAN, 0.15 * _BLUE, 0.10 * _GREEN - 0.05 * _CYAN),
        (False, False): (0.40 * _BLUE, -0.15 * _BLUE + 0.10 * _CYAN, 0.10 * _GREEN),
    }
    chroma = np.zeros((height, width, 2))
    for (is_left, is_top), (a, b, c) in ramps.items():
        sel = (left == is_left) & (top == is_top)
        chroma[sel] = a + xn[sel, None] * b + yn[sel, None] * c
    o = np.empty((height, width, 3))
    o[..., 0] = lightness * np.sqrt(3.0)
    o[..., 1:] = chroma
    img = opponent_inverse(o)
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("lightness too far from 0.5: synthetic image leaves the unit cube")
    return img


def synthetic_regions(width, height):
    """Integer region label per pixel for :func:`make_synthetic_isoluminant`."""
    y, x = np.mgrid[0:height, 0:width]
    return (x >= width // 2).astype(int) + 2 * (y >= height // 2).astype(int)


def make_inpaint_mask_from_overlay(img, key_color, tol=0.0):
    """Observed-pixel mask: False where a pixel is within ``tol`` (max-norm) of ``key_color``."""
    arr = check_image(img)
    tol = check_scalar(tol, "tol", low=0.0)
    key = np.asarray(key_color, dtype=np.float64).reshape(1, 1, 3)
    return np.max(np.abs(arr - key), axis=2) > tol
