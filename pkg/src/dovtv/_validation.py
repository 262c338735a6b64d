"""Input validation helpers shared by the solvers, metrics and estimators."""

import numbers

import numpy as np


class DimensionError(ValueError):
    """Raised when array sizes do not agree with the declared image layout."""


class NumericalFailure(RuntimeError):
    """Raised when an iterate or energy becomes non-finite.

    The partial convergence trace, when one exists, is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


def check_image(img, name="image"):
    """Return ``img`` as a C-contiguous float64 array of shape (H, W, 3).

    Raises
    ------
    DimensionError
        If the array is not three-channel.
    ValueError
        If any entry is not finite.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_same_shape(a, b, names=("ref", "test")):
    if a.shape != b.shape:
        raise DimensionError(
            f"{names[0]} and {names[1]} differ in shape: {a.shape} vs {b.shape}"
        )


def check_flat(field, width, height):
    v = np.asarray(field, dtype=np.float64)
    if v.ndim != 1 or v.size != 3 * width * height:
        raise DimensionError(
            f"expected a flat field of length {3 * width * height}, got shape {v.shape}"
        )
    return v


def check_mask(mask, height, width):
    m = np.asarray(mask)
    if m.shape != (height, width):
        raise DimensionError(f"mask shape {m.shape} does not match image ({height}, {width})")
    return m.astype(bool)


def check_scalar(x, name, low=None, high=None, low_open=False, high_open=False):
    """Check a real scalar against an interval and return it as float."""
    if not isinstance(x, numbers.Real) or isinstance(x, bool):
        raise TypeError(f"{name} must be a real number, got {type(x).__name__}")
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite")
    if low is not None and (x < low or (low_open and x == low)):
        raise ValueError(f"{name}={x} is out of range")
    if high is not None and (x > high or (high_open and x == high)):
        raise ValueError(f"{name}={x} is out of range")
    return x
