"""Operator bundle shared by the two solvers."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_image
from .image import clamp01, from_flat, to_flat
from .operators import (
    LinearMap,
    coupling_planes,
    coupling_planes_adjoint,
    coupling_squared_adjoint,
    grad_planes,
    grad_planes_adjoint,
    grad_squared_adjoint,
    identity_map,
)


@dataclass
class Problem:
    g: np.ndarray          # flat observation
    K: LinearMap
    width: int
    height: int
    K_is_identity: bool

    @property
    def shape3(self):
        return (3, self.height, self.width)

    @property
    def n_pixels(self):
        return self.width * self.height

    def Ku(self, u):
        return u if self.K_is_identity else self.K.apply(u)

    def Kt(self, r):
        return r if self.K_is_identity else self.K.apply_adjoint(r)

    def D(self, u, m):
        return grad_planes(u.reshape(self.shape3), m)

    def DC(self, u, m):
        return grad_planes(coupling_planes(u.reshape(self.shape3)), m)

    def Dt(self, d, m):
        return grad_planes_adjoint(d, m).reshape(-1)

    def DCt(self, d, m):
        return coupling_planes_adjoint(grad_planes_adjoint(d, m)).reshape(-1)

    def KtZK_diag(self, z):
        """Diagonal of ``K^T diag(z) K``; exact for identity and masks, an upper
        bound for blurs with non-negative taps."""
        if self.K_is_identity:
            return z
        return self.Kt(z * self.Ku(np.ones_like(z)))

    def DtVD_diag(self, v, m):
        return grad_squared_adjoint(v, m).reshape(-1)

    def DCtWDC_diag(self, w, m):
        return coupling_squared_adjoint(grad_squared_adjoint(w, m)).reshape(-1)

    def image(self, u):
        return from_flat(u, self.width, self.height)


def make_problem(g, K=None):
    g_img = check_image(g, "g")
    height, width = g_img.shape[:2]
    return problem_from_flat(to_flat(g_img), K, width, height)


def problem_from_flat(g, K, width, height):
    n = 3 * width * height
    if K is None:
        return Problem(g, identity_map(n), width, height, True)
    if K.input_len != n or K.output_len != n:
        raise ValueError(f"K must map length {n} to length {n}")
    return Problem(g, K, width, height, False)


def iterate_psnr(ref, u, prob):
    from .metrics import psnr

    return psnr(ref, clamp01(prob.image(u)))
