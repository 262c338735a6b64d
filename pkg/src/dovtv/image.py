"""Image layout conventions.

Images are ``(H, W, 3)`` float64 arrays with values nominally in [0, 1].
Solvers work on flat fields: the three colour planes stacked one after the
other, ``[R-plane, G-plane, B-plane]``, each plane row-major.
"""

import numpy as np

from ._validation import DimensionError, check_image


def to_flat(img):
    """Stack the colour planes of an (H, W, 3) image into a length-3N vector."""
    arr = check_image(img)
    return np.ascontiguousarray(np.moveaxis(arr, 2, 0)).reshape(-1)


def from_flat(field, width, height):
    """Inverse of :func:`to_flat`."""
    v = np.asarray(field, dtype=np.float64)
    if v.ndim != 1 or v.size != 3 * width * height:
        raise DimensionError(
            f"field of length {v.size} does not fit a {width}x{height} RGB image"
        )
    return np.ascontiguousarray(np.moveaxis(v.reshape(3, height, width), 0, 2))


def planes(field, width, height):
    """View a flat field as a (3, H, W) stack without copying."""
    return np.asarray(field).reshape(3, height, width)


def clamp01(img):
    return np.clip(img, 0.0, 1.0)


def to_uint8(img):
    """Clamp and quantize to 8 bits (round half to even, as numpy does)."""
    return np.rint(clamp01(np.asarray(img, dtype=np.float64)) * 255.0).astype(np.uint8)


def from_uint8(arr):
    return np.asarray(arr, dtype=np.float64) / 255.0
