import numpy as np
import pytest
from sklearn.base import clone

from dovtv import OpponentVTVDeblurrer, OpponentVTVDenoiser, OpponentVTVInpainter
from dovtv.degradation import apply_blur
from dovtv.metrics import psnr
from dovtv.operators import motion_kernel


def test_params_round_trip():
    est = OpponentVTVDenoiser(mu=80, M=2, alpha=(2, 1), beta=(2, 1), p=0.6, q=0.6)
    params = est.get_params()
    assert params["alpha"] == (2, 1) and params["solver"] == "bregman"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(mu=5.0)
    assert est.mu == 5.0


def test_denoiser_improves(noisy32, synthetic32):
    est = OpponentVTVDenoiser(mu=80, alpha=2, beta=2, p=0.6, q=0.6)
    out = est.fit_transform(noisy32)
    assert out.shape == noisy32.shape and out.min() >= 0 and out.max() <= 1
    assert est.n_iter_ == est.trace_.n_iter > 0
    assert est.raw_.shape == noisy32.shape
    assert est.score(noisy32, synthetic32) > psnr(synthetic32, noisy32) + 5


def test_hqa_solver_choice(noisy32):
    est = OpponentVTVDenoiser(mu=20, solver="hqa", s=1.5, max_outer=5).fit(noisy32)
    assert est.config_.s == 1.5
    assert est.transform(noisy32).shape == noisy32.shape


def test_invalid_parameters_rejected_at_fit(noisy32):
    with pytest.raises(ValueError):
        OpponentVTVDenoiser(solver="admm").fit(noisy32)
    with pytest.raises(ValueError):
        OpponentVTVDenoiser(M=1, alpha=(1, 2)).fit(noisy32)


def test_transform_before_fit(noisy32):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        OpponentVTVDenoiser().transform(noisy32)


def test_inpainter_fills_constant():
    img = np.full((16, 16, 3), [0.2, 0.5, 0.7])
    mask = np.ones((16, 16), bool)
    mask[5:10, 4:12] = False
    damaged = img.copy()
    damaged[~mask] = 0.0
    out = OpponentVTVInpainter(mask=mask, mu=50).fit_transform(damaged)
    assert np.max(np.abs(out[~mask] - img[~mask])) <= 1e-3
    with pytest.raises(ValueError):
        OpponentVTVInpainter().fit(damaged)


def test_inpainter_all_true_mask_equals_denoiser(noisy32):
    mask = np.ones(noisy32.shape[:2], bool)
    a = OpponentVTVInpainter(mask=mask, mu=20, max_outer=10).fit_transform(noisy32)
    b = OpponentVTVDenoiser(mu=20, max_outer=10).fit_transform(noisy32)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_deblurrer_accepts_taps_and_identity(synthetic32):
    k = motion_kernel(5, 0)
    blurred = apply_blur(synthetic32, k)
    est = OpponentVTVDeblurrer(kernel=k.taps, mu=1000, max_outer=30)
    out = est.fit_transform(blurred)
    assert psnr(synthetic32, out) > psnr(synthetic32, blurred)
    ident = OpponentVTVDeblurrer(kernel=np.ones((1, 1)), mu=20, max_outer=10).fit_transform(blurred)
    denoised = OpponentVTVDenoiser(mu=20, max_outer=10).fit_transform(blurred)
    assert np.allclose(ident, denoised, rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        OpponentVTVDeblurrer().fit(blurred)
