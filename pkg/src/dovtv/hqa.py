"""Half-quadratic reference solver.

Minimizes the mollified energy

    Phi(u) = mu/s     sum (|K u - g| + eps)^s
           + sum_m alpha_m/p_m sum (|D_m u|   + eps)^p_m
           +       beta_m/q_m  sum (|D_m C u| + eps)^q_m

by alternating closed-form weight updates with a weighted least-squares
solve. Each alternation minimizes a quadratic majorizer of ``Phi`` that
touches it at the current iterate, so ``Phi`` never increases. The solver
is slow but dependable and serves as the oracle for the split-Bregman path.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import NumericalFailure, check_image, check_scalar
from .cg import conjugate_gradient
from .config import ConvergenceTrace, SolverConfig, outer_threshold, relative_step
from ._problem import iterate_psnr, make_problem
from .image import clamp01, from_flat, to_flat


class Restoration(NamedTuple):
    """Raw solver output as an (H, W, 3) image plus its convergence trace."""

    image: np.ndarray
    trace: ConvergenceTrace

    @property
    def clamped(self):
        return clamp01(self.image)


def hqa_constants(p):
    """Exponent ``p/(2-p)`` and scale ``xi`` of the half-quadratic identity for ``|t|^p``."""
    p = check_scalar(p, "p", low=0.0, high=2.0, low_open=True, high_open=True)
    gamma_h = p / (2 - p)
    xi = 2 ** (2 / (2 - p)) / ((2 - p) * p ** (p / (2 - p)))
    return gamma_h, xi


def hqa_scalar_min(t, p, eps=1e-20):
    """Minimizer and minimum of ``v t^2 + 1 / (xi v^gamma_h)`` over ``v > 0``.

    The minimum equals ``|t|^p``. At ``t = 0`` the mollified magnitude
    ``|t| + eps`` is used, as in the vector weight updates.

    Returns
    -------
    v_star, min_value : float
    """
    gamma_h, xi = hqa_constants(p)
    a = abs(float(t))
    if a == 0.0:
        a = eps
    v_star = 0.5 * p * a ** (p - 2)
    return v_star, v_star * a * a + 1.0 / (xi * v_star**gamma_h)


def _mpow(x, e, eps):
    return (np.abs(x) + eps) ** e


# ---------------------------------------------------------------------------


@dataclass
class HQAWeights:
    """Half-quadratic weights: ``z`` on data residuals, ``v[m]`` on ``D_m u``,
    ``w[m]`` on ``D_m C u``; one list entry per derivative order."""

    z: np.ndarray
    v: list
    w: list


def _weights(prob, u, cfg):
    eps = cfg.eps
    z = 0.5 * cfg.s * _mpow(prob.Ku(u) - prob.g, cfg.s - 2, eps)
    v, w = [], []
    for i in range(cfg.M):
        m = i + 1
        v.append(0.5 * cfg.p[i] * _mpow(prob.D(u, m), cfg.p[i] - 2, eps))
        w.append(0.5 * cfg.q[i] * _mpow(prob.DC(u, m), cfg.q[i] - 2, eps))
    return HQAWeights(z, v, w)


def hqa_weights(u, g, K, cfg):
    """Weights of the majorizer at ``u`` (an (H, W, 3) image)."""
    prob = make_problem(g, K)
    return _weights(prob, to_flat(u), cfg)


def _normal_operator(prob, wts, cfg):
    """Weighted normal operator, right-hand side and the operator's diagonal."""
    data_scale = cfg.mu / cfg.s
    z = wts.z

    def apply_a(u):
        out = data_scale * prob.Kt(z * prob.Ku(u))
        for i in range(cfg.M):
            m = i + 1
            if cfg.alpha[i]:
                out += (cfg.alpha[i] / cfg.p[i]) * prob.Dt(wts.v[i] * prob.D(u, m), m)
            if cfg.beta[i]:
                out += (cfg.beta[i] / cfg.q[i]) * prob.DCt(wts.w[i] * prob.DC(u, m), m)
        return out

    diag = data_scale * prob.KtZK_diag(z)
    for i in range(cfg.M):
        m = i + 1
        if cfg.alpha[i]:
            diag = diag + (cfg.alpha[i] / cfg.p[i]) * prob.DtVD_diag(wts.v[i], m)
        if cfg.beta[i]:
            diag = diag + (cfg.beta[i] / cfg.q[i]) * prob.DCtWDC_diag(wts.w[i], m)
    rhs = data_scale * prob.Kt(z * prob.g)
    return apply_a, rhs, diag


def _u_step(prob, wts, cfg, u_start):
    # Jacobi preconditioning: the weights span many decades as |D u| -> 0
    apply_a, rhs, diag = _normal_operator(prob, wts, cfg)
    precond = None
    if cfg.hqa_jacobi:
        inv = np.where(diag > 0.0, 1.0 / np.where(diag > 0.0, diag, 1.0), 1.0)
        precond = lambda r: inv * r  # noqa: E731
    res = conjugate_gradient(apply_a, rhs, x0=u_start, max_iter=cfg.hqa_cg_iters,
                             tol=cfg.cg_tol, precond=precond)
    return res.x, res


def hqa_u_step(weights, g, K, cfg, u_start=None):
    """Minimize the weighted quadratic for fixed weights.

    Returns the minimizer as an image and the :class:`~dovtv.cg.CGResult`.
    """
    prob = make_problem(g, K)
    start = prob.g.copy() if u_start is None else to_flat(u_start)
    u, res = _u_step(prob, weights, cfg, start)
    return from_flat(u, prob.width, prob.height), res


def _phi(prob, u, cfg):
    eps = cfg.eps
    total = (cfg.mu / cfg.s) * float(np.sum(_mpow(prob.Ku(u) - prob.g, cfg.s, eps)))
    for i in range(cfg.M):
        m = i + 1
        if cfg.alpha[i]:
            total += (cfg.alpha[i] / cfg.p[i]) * float(np.sum(_mpow(prob.D(u, m), cfg.p[i], eps)))
        if cfg.beta[i]:
            total += (cfg.beta[i] / cfg.q[i]) * float(np.sum(_mpow(prob.DC(u, m), cfg.q[i], eps)))
    return total


def energy_phi(u, g, K, cfg):
    """The mollified energy at image ``u``."""
    prob = make_problem(g, K)
    return _phi(prob, to_flat(check_image(u, "u")), cfg)


def _pair_terms(prob, u, uk, cfg):
    """Yield (scale, values at u, values at u_k, exponent) per energy term."""
    yield cfg.mu / cfg.s, prob.Ku(u) - prob.g, prob.Ku(uk) - prob.g, cfg.s
    for i in range(cfg.M):
        m = i + 1
        if cfg.alpha[i]:
            yield cfg.alpha[i] / cfg.p[i], prob.D(u, m), prob.D(uk, m), cfg.p[i]
        if cfg.beta[i]:
            yield cfg.beta[i] / cfg.q[i], prob.DC(u, m), prob.DC(uk, m), cfg.q[i]


def _majorizer(prob, u, uk, cfg):
    eps = cfg.eps
    total = 0.0
    for scale, x, xk, e in _pair_terms(prob, u, uk, cfg):
        ak = np.abs(xk) + eps
        a = np.abs(x) + eps
        total += scale * float(np.sum(0.5 * e * ak ** (e - 2) * a * a + 0.5 * (2 - e) * ak**e))
    return total


def majorizer_F(u, u_k, g, K, cfg):
    """Quadratic majorizer of ``Phi`` built at ``u_k``, evaluated at ``u``."""
    prob = make_problem(g, K)
    return _majorizer(prob, to_flat(check_image(u, "u")), to_flat(check_image(u_k, "u_k")), cfg)


def majorizer_grad(u, u_k, g, K, cfg):
    """Gradient of :func:`majorizer_F` with respect to ``u``, as an image."""
    prob = make_problem(g, K)
    uf, ukf = to_flat(u), to_flat(u_k)
    eps = cfg.eps

    def dterm(scale, x, xk, e):
        ak = np.abs(xk) + eps
        return scale * e * ak ** (e - 2) * (np.abs(x) + eps) * np.sign(x)

    r, rk = prob.Ku(uf) - prob.g, prob.Ku(ukf) - prob.g
    grad = prob.Kt(dterm(cfg.mu / cfg.s, r, rk, cfg.s))
    for i in range(cfg.M):
        m = i + 1
        if cfg.alpha[i]:
            grad += prob.Dt(dterm(cfg.alpha[i] / cfg.p[i], prob.D(uf, m), prob.D(ukf, m), cfg.p[i]), m)
        if cfg.beta[i]:
            grad += prob.DCt(dterm(cfg.beta[i] / cfg.q[i], prob.DC(uf, m), prob.DC(ukf, m), cfg.q[i]), m)
    return from_flat(grad, prob.width, prob.height)


def initial_guess(g, mask=None):
    """``g`` itself, with unobserved pixels replaced by the observed channel means."""
    g = check_image(g, "g")
    if mask is None:
        return g.copy()
    keep = np.asarray(mask, dtype=bool)
    if not keep.any():
        raise ValueError("mask has no observed pixels")
    u0 = g.copy()
    u0[~keep] = g[keep].mean(axis=0)
    return u0


def hqa_solve(g, K=None, cfg=None, ground_truth=None, u0=None, callback=None):
    """Run the half-quadratic alternation from ``u0`` (default ``g``).

    Stops when the relative squared step falls below the threshold (the
    noise-aware rule when ``cfg.sigma`` is set, otherwise ``cfg.tol``) or
    after ``cfg.max_outer`` iterations. ``callback(k, u_prev, u_next)``
    receives flat vectors after every outer iteration.

    Returns
    -------
    Restoration
        Raw minimizer (unclamped) and trace.
    """
    cfg = SolverConfig() if cfg is None else cfg
    prob = make_problem(g, K)
    ref = None if ground_truth is None else check_image(ground_truth, "ground_truth")
    u = prob.g.copy() if u0 is None else to_flat(check_image(u0, "u0"))
    trace = ConvergenceTrace(threshold=outer_threshold(cfg, prob.n_pixels))
    trace.phi.append(_phi(prob, u, cfg))
    for k in range(cfg.max_outer):
        wts = _weights(prob, u, cfg)
        u_new, _ = _u_step(prob, wts, cfg, u)
        phi = _phi(prob, u_new, cfg)
        if not math.isfinite(phi):
            raise NumericalFailure(f"energy became non-finite at iteration {k + 1}", trace)
        step = relative_step(u, u_new)
        trace.phi.append(phi)
        trace.rel_step.append(step)
        if ref is not None:
            trace.psnr.append(iterate_psnr(ref, u_new, prob))
        if callback is not None:
            callback(k + 1, u, u_new)
        u = u_new
        if step < trace.threshold:
            trace.converged = True
            break
    return Restoration(from_flat(u, prob.width, prob.height), trace)
