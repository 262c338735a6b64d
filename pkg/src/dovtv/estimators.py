"""scikit-learn style front end for the restoration solvers.

Each estimator takes one degraded (H, W, 3) image as ``X``. ``fit`` only
validates the hyper-parameters (there is nothing to learn); ``transform``
runs the chosen solver and returns the clamped restoration. ``score``
is the PSNR of that restoration against a clean reference ``y``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image, check_mask
from .bregman import bregman_solve
from .config import SolverConfig
from .hqa import hqa_solve, initial_guess
from .metrics import psnr
from .operators import BlurKernel, blur_map, mask_map

SOLVERS = {"bregman": bregman_solve, "hqa": hqa_solve}


class _OpponentVTV(TransformerMixin, BaseEstimator):
    """Shared parameters and solver plumbing.

    Parameters
    ----------
    mu : float
        Data-term weight.
    alpha, beta : float or sequence of float
        Per-order weights (penalty weights for ``solver="bregman"``).
    p, q : float or sequence of float
        Per-order exponents of the plain and coupled regularizers.
    M : {1, 2}
        Highest derivative order.
    s : float
        Data exponent; the split-Bregman solver needs ``s = 2``.
    solver : {"bregman", "hqa"}
    sigma : float or None
        Noise level in 8-bit units; enables the noise-aware stopping rule.
    tol, max_outer, cg_iters, eps
        Stopping tolerance, outer cap, inner CG steps and mollifier.
    """

    def __init__(self, mu=1.0, alpha=1.0, beta=1.0, p=1.0, q=1.0, M=1, s=2.0,
                 solver="bregman", sigma=None, tol=1e-6, max_outer=500, cg_iters=5, eps=1e-20):
        self.mu = mu
        self.alpha = alpha
        self.beta = beta
        self.p = p
        self.q = q
        self.M = M
        self.s = s
        self.solver = solver
        self.sigma = sigma
        self.tol = tol
        self.max_outer = max_outer
        self.cg_iters = cg_iters
        self.eps = eps

    def _config(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {sorted(SOLVERS)}, got {self.solver!r}")
        as_param = lambda v: v if np.isscalar(v) else tuple(v)  # noqa: E731
        return SolverConfig(
            mu=self.mu, s=self.s, M=self.M,
            alpha=as_param(self.alpha), beta=as_param(self.beta),
            p=as_param(self.p), q=as_param(self.q),
            eps=self.eps, max_outer=self.max_outer, cg_iters=self.cg_iters,
            sigma=self.sigma, tol=self.tol,
        )

    def _operator(self, height, width):
        return None

    def _start(self, X):
        return None

    def fit(self, X, y=None):
        X = check_image(X, "X")
        self.config_ = self._config()
        self._operator(*X.shape[:2])
        self.image_shape_ = X.shape
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_image(X, "X")
        K = self._operator(*X.shape[:2])
        result = SOLVERS[self.solver](X, K=K, cfg=self.config_, u0=self._start(X))
        self.raw_ = result.image
        self.trace_ = result.trace
        self.n_iter_ = result.trace.n_iter
        return result.clamped

    def score(self, X, y):
        """PSNR (dB) of the restoration of ``X`` against the clean image ``y``."""
        return psnr(y, self.transform(X))


class OpponentVTVDenoiser(_OpponentVTV):
    """Denoising with the identity forward operator."""


class OpponentVTVInpainter(_OpponentVTV):
    """Inpainting: ``mask`` is an (H, W) boolean array, True where observed.

    Unobserved pixels start from the mean colour of the observed ones.
    """

    def __init__(self, mask=None, mu=1.0, alpha=1.0, beta=1.0, p=1.0, q=1.0, M=1, s=2.0,
                 solver="bregman", sigma=None, tol=1e-6, max_outer=500, cg_iters=5, eps=1e-20):
        super().__init__(mu=mu, alpha=alpha, beta=beta, p=p, q=q, M=M, s=s, solver=solver,
                         sigma=sigma, tol=tol, max_outer=max_outer, cg_iters=cg_iters, eps=eps)
        self.mask = mask

    def _operator(self, height, width):
        if self.mask is None:
            raise ValueError("OpponentVTVInpainter needs a mask")
        return mask_map(check_mask(self.mask, height, width), width, height)

    def _start(self, X):
        return initial_guess(X, self.mask)


class OpponentVTVDeblurrer(_OpponentVTV):
    """Non-blind deblurring with a known :class:`~dovtv.operators.BlurKernel`."""

    def __init__(self, kernel=None, mu=1.0, alpha=1.0, beta=1.0, p=1.0, q=1.0, M=1, s=2.0,
                 solver="bregman", sigma=None, tol=1e-6, max_outer=500, cg_iters=5, eps=1e-20):
        super().__init__(mu=mu, alpha=alpha, beta=beta, p=p, q=q, M=M, s=s, solver=solver,
                         sigma=sigma, tol=tol, max_outer=max_outer, cg_iters=cg_iters, eps=eps)
        self.kernel = kernel

    def _operator(self, height, width):
        if self.kernel is None:
            raise ValueError("OpponentVTVDeblurrer needs a kernel")
        kernel = self.kernel
        if not isinstance(kernel, BlurKernel):
            kernel = BlurKernel.from_taps(kernel)
        return blur_map(kernel, width, height)
