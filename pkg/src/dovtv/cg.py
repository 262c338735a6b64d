"""Conjugate gradients for the symmetric positive (semi-)definite normal
equations that appear in both solvers."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import NumericalFailure


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual_norms: list = field(default_factory=list)
    converged: bool = False


def conjugate_gradient(apply_a, b, x0=None, max_iter=100, tol=0.0, precond=None):
    """Solve ``A x = b`` for SPD ``A`` given as a callable.

    Stops once ``||b - A x|| <= tol * ||b||`` or after ``max_iter`` steps.
    ``residual_norms[0]`` is the initial residual norm. ``precond`` is an
    optional callable applying an SPD approximation of ``A^{-1}``.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - apply_a(x) if x0 is not None else b.copy()
    bnorm = float(np.linalg.norm(b))
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    target = tol * bnorm
    if rnorm <= target or rnorm == 0.0:
        return CGResult(x, 0, history, True)
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        pap = float(p @ ap)
        if not np.isfinite(pap):
            raise NumericalFailure("conjugate gradient produced non-finite values")
        if pap <= 0.0:
            # exact breakdown on a singular direction; x is already optimal along p
            it -= 1
            break
        step = rz / pap
        x += step * p
        r -= step * ap
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        if rnorm <= target:
            converged = True
            break
        z = precond(r) if precond is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("conjugate gradient produced non-finite values")
    return CGResult(x, it, history, converged)
