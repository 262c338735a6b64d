"""Double-opponent colour geometry.

The opponent transform is an orthogonal rotation of RGB space whose first
axis is the gray diagonal. Colourfulness ``gamma`` is the squared norm of the
chromatic part, scaled by 3, and is what couples the channels in the
regularizer.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_image

#: Rows are the lightness, blue-yellow and red-green axes.
OPPONENT = np.diag([1 / np.sqrt(3), 1 / np.sqrt(6), 1 / np.sqrt(2)]) @ np.array(
    [[1.0, 1.0, 1.0], [1.0, 1.0, -2.0], [1.0, -1.0, 0.0]]
)
OPPONENT_INV = OPPONENT.T

#: Pairwise channel differences; ``COUPLING @ (r, g, b) = (r-g, g-b, b-r)``.
COUPLING = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]])
#: ``COUPLING.T @ COUPLING``; the quadratic form behind gamma.
COLORFULNESS = COUPLING.T @ COUPLING

HUE_EPS = 1e-12


def opponent_forward(rgb):
    """Map RGB triples (last axis of length 3) to opponent coordinates."""
    return np.asarray(rgb, dtype=np.float64) @ OPPONENT.T


def opponent_inverse(o):
    return np.asarray(o, dtype=np.float64) @ OPPONENT


def to_lhs(o):
    """Lightness, hue and saturation of opponent triples.

    Hue is ``arctan(o2 / o3)`` as a single-argument arctangent, so opposite
    hues share an angle. Where the saturation is at most ``HUE_EPS`` the hue
    is undefined and reported as 0. ``o3 == 0`` with nonzero ``o2`` gives
    ``+-pi/2``.

    Returns
    -------
    L, h, s : ndarray
    """
    o = np.asarray(o, dtype=np.float64)
    o1, o2, o3 = o[..., 0], o[..., 1], o[..., 2]
    s = np.hypot(o2, o3)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.arctan(o2 / o3)
    h = np.where(o3 == 0.0, np.copysign(np.pi / 2, o2), h)
    h = np.where(s > HUE_EPS, h, 0.0)
    if h.ndim == 0:
        return float(o1), float(h), float(s)
    return o1.copy(), h, s


def gamma_map(img):
    """Per-pixel colourfulness ``(b-r)^2 + (r-g)^2 + (g-b)^2`` as an (H, W) plane."""
    arr = check_image(img)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    return (b - r) ** 2 + (r - g) ** 2 + (g - b) ** 2


def gamma_quadratic(rgb):
    """Colourfulness through the quadratic form ``u^T P u``."""
    u = np.asarray(rgb, dtype=np.float64)
    return np.einsum("...i,ij,...j->...", u, COLORFULNESS, u)


@dataclass(frozen=True)
class MetricEigenSystem:
    """Closed-form eigen-system of the pullback metric at one RGB point.

    Eigenvectors are left unnormalized: ``ones`` with eigenvalue 1/3,
    ``alpha`` with ``1/3 + 3/f_sq`` and ``beta`` with 4/3. When the point is
    on the gray axis ``degenerate`` is set and the middle eigenvalue is nan.
    """

    alpha: np.ndarray
    beta: np.ndarray
    f_sq: float
    eigenvalues: tuple
    degenerate: bool

    @property
    def eigenvectors(self):
        return (np.ones(3), self.alpha, self.beta)


def metric_eigensystem(rgb):
    r, g, b = (float(x) for x in np.asarray(rgb, dtype=np.float64))
    alpha = np.array([b - g, r - b, g - r])
    beta = np.array([b + g - 2 * r, b + r - 2 * g, r + g - 2 * b])
    f_sq = float(alpha @ alpha)
    if f_sq == 0.0:
        return MetricEigenSystem(alpha, beta, 0.0, (1 / 3, np.nan, 4 / 3), True)
    return MetricEigenSystem(alpha, beta, f_sq, (1 / 3, 1 / 3 + 3 / f_sq, 4 / 3), False)


def metric_tensor(rgb):
    """Pullback metric ``G(u) = (I + 9/f^4 a a^T + 1/f^2 b b^T) / 3``.

    Raises ``ValueError`` on the gray axis where the metric is undefined.
    """
    es = metric_eigensystem(rgb)
    if es.degenerate:
        raise ValueError("metric is undefined on the gray axis (f^2 = 0)")
    a, b, f2 = es.alpha, es.beta, es.f_sq
    return (np.eye(3) + 9 / f2**2 * np.outer(a, a) + np.outer(b, b) / f2) / 3
