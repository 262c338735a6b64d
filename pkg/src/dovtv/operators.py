"""Matrix-free linear operators on flat colour fields.

Every operator acts channel by channel on the stacked layout of
:mod:`dovtv.image`, except the coupling operator which mixes the three
channels of each pixel. Adjoints are exact transposes, boundary handling
included, so that the conjugate-gradient normal equations are symmetric.

Gradient layout: order 1 yields ``(3, 2, H, W)`` = ``[Dx, Dy]`` per channel,
order 2 yields ``(3, 4, H, W)`` = ``[Dxx, Dxy, Dyx, Dyy]`` per channel, both
flattened. Forward differences with Neumann boundary: the difference across
the last column (for x) or last row (for y) is 0.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import DimensionError, check_mask
from .color import COUPLING

N_COMPONENTS = {1: 2, 2: 4}


@dataclass(frozen=True)
class LinearMap:
    """A linear operator given by its action and the action of its transpose."""

    input_len: int
    output_len: int
    apply: Callable[[np.ndarray], np.ndarray]
    apply_adjoint: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.apply(x)

    @property
    def T(self):
        return LinearMap(self.output_len, self.input_len, self.apply_adjoint, self.apply)

    def __matmul__(self, other):
        if not isinstance(other, LinearMap):
            return self.apply(other)
        if other.output_len != self.input_len:
            raise DimensionError("operator sizes do not chain")
        return LinearMap(
            other.input_len,
            self.output_len,
            lambda x: self.apply(other.apply(x)),
            lambda y: other.apply_adjoint(self.apply_adjoint(y)),
        )


def identity_map(n):
    return LinearMap(n, n, lambda x: np.array(x, dtype=np.float64), lambda y: np.array(y, dtype=np.float64))


# ---------------------------------------------------------------------------
# finite differences on (..., H, W) stacks


def _dx(a):
    out = np.zeros_like(a)
    out[..., :, :-1] = a[..., :, 1:] - a[..., :, :-1]
    return out


def _dx_t(a):
    out = np.zeros_like(a)
    out[..., :, 1:] += a[..., :, :-1]
    out[..., :, :-1] -= a[..., :, :-1]
    return out


def _dy(a):
    out = np.zeros_like(a)
    out[..., :-1, :] = a[..., 1:, :] - a[..., :-1, :]
    return out


def _dy_t(a):
    out = np.zeros_like(a)
    out[..., 1:, :] += a[..., :-1, :]
    out[..., :-1, :] -= a[..., :-1, :]
    return out


def _check_order(m):
    if m not in N_COMPONENTS:
        raise ValueError(f"derivative order must be 1 or 2, got {m!r}")


def grad_planes(u, m):
    """Order-``m`` derivatives of a (3, H, W) stack, returned as (3, k, H, W)."""
    _check_order(m)
    if m == 1:
        return np.stack([_dx(u), _dy(u)], axis=1)
    ux, uy = _dx(u), _dy(u)
    return np.stack([_dx(ux), _dy(ux), _dx(uy), _dy(uy)], axis=1)


def grad_planes_adjoint(d, m):
    _check_order(m)
    if m == 1:
        return _dx_t(d[:, 0]) + _dy_t(d[:, 1])
    return _dx_t(_dx_t(d[:, 0]) + _dy_t(d[:, 1])) + _dy_t(_dx_t(d[:, 2]) + _dy_t(d[:, 3]))


def grad_apply(u, m, width, height):
    """Stacked order-``m`` forward differences of a flat field."""
    _check_order(m)
    u = np.asarray(u, dtype=np.float64)
    if u.size != 3 * width * height:
        raise DimensionError(f"field length {u.size} does not match {width}x{height}x3")
    return grad_planes(u.reshape(3, height, width), m).reshape(-1)


def grad_adjoint(d, m, width, height):
    """Exact transpose of :func:`grad_apply` (a negative divergence)."""
    _check_order(m)
    d = np.asarray(d, dtype=np.float64)
    k = N_COMPONENTS[m]
    if d.size != 3 * k * width * height:
        raise DimensionError(
            f"derivative vector length {d.size} does not match order {m} on {width}x{height}x3"
        )
    return grad_planes_adjoint(d.reshape(3, k, height, width), m).reshape(-1)


def gradient_map(m, width, height):
    n = 3 * width * height
    return LinearMap(
        n,
        N_COMPONENTS[m] * n,
        lambda u: grad_apply(u, m, width, height),
        lambda d: grad_adjoint(d, m, width, height),
    )


def _sq1_t(w, axis):
    """``(D o D)^T`` along ``axis`` for one forward difference (entries are +-1)."""
    w = np.moveaxis(w, axis, -1)
    out = np.zeros_like(w)
    out[..., :-1] += w[..., :-1]
    out[..., 1:] += w[..., :-1]
    return np.moveaxis(out, -1, axis)


def _sq2_t(w, axis):
    """``(D D o D D)^T`` along ``axis``: stencil (1, -2, 1), cut to (1, -1) next
    to the trailing boundary."""
    w = np.moveaxis(w, axis, -1)
    out = np.zeros_like(w)
    if w.shape[-1] >= 2:
        out[..., :-2] += w[..., :-2]
        out[..., 1:-1] += 4.0 * w[..., :-2]
        out[..., 2:] += w[..., :-2]
        out[..., -2] += w[..., -2]
        out[..., -1] += w[..., -2]
    return np.moveaxis(out, -1, axis)


def grad_squared_adjoint(w, m):
    """``sum_k (A_k o A_k)^T w_k`` for a (3, k, H, W) weight stack, where ``A_k``
    are the derivative components and ``o`` is the entrywise product.

    This is the diagonal of ``D^T diag(w) D``, as a (3, H, W) stack.
    """
    _check_order(m)
    x, y = -1, -2
    if m == 1:
        return _sq1_t(w[:, 0], x) + _sq1_t(w[:, 1], y)
    # mixed components factor as a product of one-axis squared stencils
    return (_sq2_t(w[:, 0], x) + _sq1_t(_sq1_t(w[:, 1], y), x)
            + _sq1_t(_sq1_t(w[:, 2], x), y) + _sq2_t(w[:, 3], y))


# ---------------------------------------------------------------------------
# channel coupling C = C1 (x) I_N


def coupling_planes(u):
    """Apply ``C1`` to the channel axis (axis 0) of a stack."""
    return np.stack([u[0] - u[1], u[1] - u[2], u[2] - u[0]])


def coupling_planes_adjoint(v):
    return np.stack([v[0] - v[2], v[1] - v[0], v[2] - v[1]])


def coupling_apply(u):
    u = np.asarray(u, dtype=np.float64)
    if u.size % 3:
        raise DimensionError("field length must be divisible by 3")
    return coupling_planes(u.reshape(3, -1)).reshape(-1)


def coupling_adjoint(v):
    v = np.asarray(v, dtype=np.float64)
    if v.size % 3:
        raise DimensionError("field length must be divisible by 3")
    return coupling_planes_adjoint(v.reshape(3, -1)).reshape(-1)


def coupling_squared_adjoint(v):
    """``(C1 o C1)^T`` on the channel axis; with entries in {-1, 0, 1} this is ``|C1|^T``."""
    return np.stack([v[0] + v[2], v[1] + v[0], v[2] + v[1]])


def coupling_map(n_pixels):
    n = 3 * n_pixels
    return LinearMap(n, n, coupling_apply, coupling_adjoint)


def coupling_matrix(n_pixels):
    """Dense ``C1 (x) I_N``, for small-instance checks only."""
    return np.kron(COUPLING, np.eye(n_pixels))


# ---------------------------------------------------------------------------
# blur


@dataclass(frozen=True)
class BlurKernel:
    """A correlation stencil anchored at ``anchor`` (row, col)."""

    taps: np.ndarray
    anchor: tuple

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 2 or taps.size == 0:
            raise ValueError("kernel taps must be a non-empty 2-D array")
        if not np.all(np.isfinite(taps)):
            raise ValueError("kernel taps must be finite")
        total = taps.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"kernel taps must sum to 1, got {total}")
        ar, ac = self.anchor
        if not (0 <= ar < taps.shape[0] and 0 <= ac < taps.shape[1]):
            raise ValueError("kernel anchor lies outside the taps")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "anchor", (int(ar), int(ac)))

    @classmethod
    def from_taps(cls, taps, normalize=False):
        """Kernel anchored at the centre tap; even sizes anchor below/right of centre."""
        taps = np.atleast_2d(np.asarray(taps, dtype=np.float64))
        if normalize:
            taps = taps / taps.sum()
        return cls(taps, (taps.shape[0] // 2, taps.shape[1] // 2))

    @classmethod
    def identity(cls):
        return cls(np.ones((1, 1)), (0, 0))

    @property
    def shape(self):
        return self.taps.shape


def _blur_pads(kernel, height, width):
    kh, kw = kernel.shape
    if kh > height or kw > width:
        raise DimensionError(f"kernel {kernel.shape} is larger than the image ({height}, {width})")
    ar, ac = kernel.anchor
    return ar, kh - 1 - ar, ac, kw - 1 - ac


def blur_planes(u, kernel):
    """Correlate each plane of a (..., H, W) stack with replicate boundary."""
    h, w = u.shape[-2:]
    top, bottom, left, right = _blur_pads(kernel, h, w)
    pad = [(0, 0)] * (u.ndim - 2) + [(top, bottom), (left, right)]
    padded = np.pad(u, pad, mode="edge")
    out = np.zeros_like(u)
    kh, kw = kernel.shape
    for a in range(kh):
        for b in range(kw):
            t = kernel.taps[a, b]
            if t != 0.0:
                out += t * padded[..., a : a + h, b : b + w]
    return out


def blur_planes_adjoint(v, kernel):
    """Transpose of :func:`blur_planes`: scatter into the padded frame, then fold
    the replicated border back onto the edge pixels it was copied from."""
    h, w = v.shape[-2:]
    top, bottom, left, right = _blur_pads(kernel, h, w)
    kh, kw = kernel.shape
    padded = np.zeros(v.shape[:-2] + (h + top + bottom, w + left + right))
    for a in range(kh):
        for b in range(kw):
            t = kernel.taps[a, b]
            if t != 0.0:
                padded[..., a : a + h, b : b + w] += t * v
    # fold rows, then columns
    rows = padded[..., top : top + h, :].copy()
    rows[..., 0, :] += padded[..., :top, :].sum(axis=-2)
    rows[..., -1, :] += padded[..., top + h :, :].sum(axis=-2)
    out = rows[..., :, left : left + w].copy()
    out[..., :, 0] += rows[..., :, :left].sum(axis=-1)
    out[..., :, -1] += rows[..., :, left + w :].sum(axis=-1)
    return out


def blur_apply(u, kernel, width, height):
    u = np.asarray(u, dtype=np.float64)
    if u.size != 3 * width * height:
        raise DimensionError(f"field length {u.size} does not match {width}x{height}x3")
    return blur_planes(u.reshape(3, height, width), kernel).reshape(-1)


def blur_adjoint(v, kernel, width, height):
    v = np.asarray(v, dtype=np.float64)
    if v.size != 3 * width * height:
        raise DimensionError(f"field length {v.size} does not match {width}x{height}x3")
    return blur_planes_adjoint(v.reshape(3, height, width), kernel).reshape(-1)


def blur_map(kernel, width, height):
    _blur_pads(kernel, height, width)
    n = 3 * width * height
    return LinearMap(
        n,
        n,
        lambda u: blur_apply(u, kernel, width, height),
        lambda v: blur_adjoint(v, kernel, width, height),
    )


def motion_kernel(length_px=9, angle_deg=10.0):
    """Linear motion blur of ``length_px`` pixels at ``angle_deg`` counter-clockwise.

    The segment is sampled at unit spacing, centred on the anchor, and each
    sample is splatted bilinearly onto the grid. Zero border rows and columns
    are trimmed symmetrically, so an axis-aligned segment gives a 1-pixel-thick
    kernel.
    """
    length = int(length_px)
    if length < 1:
        raise ValueError("motion length must be at least 1 pixel")
    theta = np.deg2rad(angle_deg)
    t = np.arange(length) - (length - 1) / 2.0
    # image rows grow downwards, so counter-clockwise means negative row offset
    xs = t * np.cos(theta)
    ys = -t * np.sin(theta)
    radius = int(np.ceil(max(np.abs(xs).max(), np.abs(ys).max()) + 1e-12))
    size = 2 * radius + 1
    taps = np.zeros((size, size))
    for x, y in zip(xs, ys):
        x0, y0 = np.floor(x), np.floor(y)
        fx, fy = x - x0, y - y0
        c0, r0 = int(x0) + radius, int(y0) + radius
        for dr, wr in ((0, 1 - fy), (1, fy)):
            for dc, wc in ((0, 1 - fx), (1, fx)):
                wgt = wr * wc
                if wgt > 1e-15:
                    taps[r0 + dr, c0 + dc] += wgt
    taps /= taps.sum()
    while taps.shape[0] > 1 and not taps[0].any() and not taps[-1].any():
        taps = taps[1:-1]
    while taps.shape[1] > 1 and not taps[:, 0].any() and not taps[:, -1].any():
        taps = taps[:, 1:-1]
    return BlurKernel(taps, (taps.shape[0] // 2, taps.shape[1] // 2))


# ---------------------------------------------------------------------------
# mask


def mask_apply(u, mask):
    """Zero all three channels at pixels where ``mask`` is False."""
    keep = np.asarray(mask, dtype=bool)
    u = np.asarray(u, dtype=np.float64)
    h, w = keep.shape
    if u.size != 3 * h * w:
        raise DimensionError(f"field length {u.size} does not match mask {keep.shape}")
    return (u.reshape(3, h, w) * keep).reshape(-1)


def mask_map(mask, width, height):
    keep = check_mask(mask, height, width)
    n = 3 * width * height
    f = lambda u: mask_apply(u, keep)  # noqa: E731
    return LinearMap(n, n, f, f)
