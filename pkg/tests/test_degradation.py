import numpy as np
import pytest

from dovtv.color import gamma_map, opponent_forward
from dovtv.degradation import (
    DegradationSpec,
    add_opponent_noise,
    apply_blur,
    apply_mask,
    degrade,
    make_inpaint_mask_from_overlay,
    make_synthetic_isoluminant,
    noise_covariance_rgb,
    synthetic_regions,
)
from dovtv.operators import BlurKernel, grad_planes, motion_kernel
from tests._helpers import random_image


def _noise_samples(sigma=20, seed=5):
    base = np.full((200, 500, 3), 0.5)
    return (add_opponent_noise(base, sigma, seed) - base).reshape(-1, 3)


def test_zero_sigma_is_identity(rng):
    img = random_image(rng)
    assert np.max(np.abs(add_opponent_noise(img, 0, 1) - img)) <= 1e-14


def test_lightness_untouched(rng):
    img = random_image(rng, 20, 20)
    noisy = add_opponent_noise(img, 60, 2)
    assert np.max(np.abs(opponent_forward(noisy)[..., 0] - opponent_forward(img)[..., 0])) <= 1e-12


def test_noise_variance_and_correlation():
    n = _noise_samples()
    s2 = (20 / 255) ** 2
    var = n.var(axis=0)
    assert np.all(np.abs(var / (2 / 3 * s2) - 1) < 0.05)
    corr = np.corrcoef(n.T)
    for i, j in ((0, 1), (1, 2), (0, 2)):
        assert abs(corr[i, j] + 0.5) < 0.05


def test_noise_reproducible_and_seed_dependent(rng):
    img = random_image(rng)
    a, b = add_opponent_noise(img, 20, 7), add_opponent_noise(img, 20, 7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, add_opponent_noise(img, 20, 8))


def test_noise_not_clamped():
    img = np.full((20, 20, 3), 0.02)
    assert add_opponent_noise(img, 80, 0).min() < 0.0


def test_covariance_closed_form():
    sigma = 0.3
    cov = noise_covariance_rgb(sigma)
    assert np.allclose(cov, sigma**2 * (np.eye(3) - np.ones((3, 3)) / 3), rtol=0, atol=1e-12)
    assert np.allclose(np.diag(cov), 2 * sigma**2 / 3, rtol=0, atol=1e-12)
    assert cov[0, 1] == pytest.approx(-(sigma**2) / 3, abs=1e-12)
    assert not np.any(noise_covariance_rgb(0.0))


def test_empirical_covariance_matches_model():
    n = _noise_samples(sigma=40, seed=9)
    model = noise_covariance_rgb(40 / 255)
    assert np.allclose(np.cov(n.T), model, rtol=0, atol=0.05 * model[0, 0])


@pytest.mark.parametrize("size", [(8, 8), (32, 32), (64, 48)])
def test_synthetic_image_properties(size):
    w, h = size
    img = make_synthetic_isoluminant(w, h)
    assert img.shape == (h, w, 3)
    assert img.min() >= 0.0 and img.max() <= 1.0
    o = opponent_forward(img)
    assert np.ptp(o[..., 0]) <= 1e-12
    assert gamma_map(img).min() > 0.0


def test_synthetic_image_piecewise_affine():
    w, h = 40, 36
    o = opponent_forward(make_synthetic_isoluminant(w, h))
    planes = np.moveaxis(o, 2, 0)
    d2 = grad_planes(planes, 2)
    reg = synthetic_regions(w, h)
    # every second-order stencil at (i, j) reads pixels in the block [i, i+2] x [j, j+2]
    same = np.ones((h - 2, w - 2), bool)
    for di in range(3):
        for dj in range(3):
            same &= reg[di:h - 2 + di, dj:w - 2 + dj] == reg[:h - 2, :w - 2]
    inner = d2[:, :, :h - 2, :w - 2][..., same]
    assert np.max(np.abs(inner[1:])) <= 1e-12
    # the regions really differ
    assert len({tuple(np.round(o[y, x, 1:], 6)) for y, x in ((0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1))}) == 4


def test_synthetic_image_rejects_tiny():
    with pytest.raises(ValueError):
        make_synthetic_isoluminant(7, 8)


def test_overlay_mask():
    img = np.random.default_rng(1).random((6, 5, 3)) * 0.5
    key = (1.0, 0.0, 1.0)
    assert make_inpaint_mask_from_overlay(img, key, 0).all()
    keyed = np.broadcast_to(np.array(key), img.shape).copy()
    assert not make_inpaint_mask_from_overlay(keyed, key, 0).any()
    img[2, 3] = [0.99, 0.01, 1.0]
    mask = make_inpaint_mask_from_overlay(img, key, 0.02)
    assert mask.shape == (6, 5) and mask.sum() == 29 and not mask[2, 3]
    with pytest.raises(ValueError):
        make_inpaint_mask_from_overlay(img, key, -1)


def test_spec_validation():
    k = BlurKernel.from_taps(np.ones((3, 3)) / 9)
    m = np.ones((4, 4), bool)
    with pytest.raises(ValueError):
        DegradationSpec("speckle")
    with pytest.raises(ValueError):
        DegradationSpec("blur")
    with pytest.raises(ValueError):
        DegradationSpec("opponent_noise", kernel=k)
    with pytest.raises(ValueError):
        DegradationSpec("mask", mask=m, kernel=k)
    with pytest.raises(ValueError):
        DegradationSpec("opponent_noise", sigma_8bit=-1)
    DegradationSpec("blur", kernel=k)
    DegradationSpec("mask", mask=m)


def test_degrade_dispatch(rng):
    img = random_image(rng, 10, 12)
    k = motion_kernel(5, 0)
    mask = rng.random((10, 12)) > 0.3
    assert np.array_equal(degrade(img, DegradationSpec("blur", kernel=k)), apply_blur(img, k))
    masked = DegradationSpec("mask", mask=mask).apply(img)
    assert np.array_equal(masked, apply_mask(img, mask))
    assert not np.any(masked[~mask]) and np.array_equal(masked[mask], img[mask])
    noisy_blur = degrade(img, DegradationSpec("blur", sigma_8bit=10, seed=3, kernel=k))
    assert np.array_equal(noisy_blur, add_opponent_noise(apply_blur(img, k), 10, 3))
    assert np.array_equal(degrade(img, DegradationSpec("opponent_noise", 20, 4)),
                          add_opponent_noise(img, 20, 4))


def test_blur_preserves_constants():
    img = np.full((9, 9, 3), 0.3)
    assert np.allclose(apply_blur(img, motion_kernel(9, 10)), 0.3, rtol=0, atol=1e-15)
