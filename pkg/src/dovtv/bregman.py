"""Split-Bregman solver with half-quadratic updates for non-convex exponents.

Auxiliary variables ``d_m = D_m u`` and ``e_m = D_m C u`` are split off and
enforced through Bregman variables ``b1_m``, ``b2_m``. Each outer iteration
runs a few warm-started CG steps on the u-subproblem, then a pointwise
update of ``d`` and ``e`` (soft thresholding for exponent 1, the
half-quadratic closed form otherwise), then the Bregman update.

``alpha_m`` and ``beta_m`` are the constraint penalty weights, so the energy
the iteration drives down is

    mu/2 ||K u - g||^2 + sum_m ( ||D_m u||_p^p + ||D_m C u||_q^q )

with terms dropped for orders whose penalty is 0 (see :func:`bregman_energy`).
Only the quadratic data term (``s = 2``) is supported; use
:func:`dovtv.hqa.hqa_solve` for other data exponents.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import NumericalFailure, check_image
from .cg import conjugate_gradient
from .config import ConvergenceTrace, SolverConfig, outer_threshold, relative_step
from ._problem import iterate_psnr, make_problem, problem_from_flat
from .hqa import Restoration
from .image import from_flat, to_flat


class ConfigurationError(ValueError):
    pass


def shrink(x, tau):
    """Soft thresholding ``sign(x) * max(|x| - tau, 0)``."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


@dataclass
class BregmanState:
    """Iterate ``u`` (flat) and per-order auxiliaries, each of shape (3, k, H, W)."""

    u: np.ndarray
    d: list
    e: list
    b1: list
    b2: list
    width: int
    height: int

    @classmethod
    def initial(cls, u0, width, height, cfg):
        """Start state at ``u0`` with zero Bregman variables.

        The split variables get one pointwise update from the exact splits
        ``D u0`` and ``D C u0`` (weights formed at those splits), so they
        already carry the shrinkage of the regularizer; starting them at the
        exact splits would make the first u-step a fixed point.
        """
        u0 = np.asarray(u0, dtype=np.float64).copy()
        prob = problem_from_flat(u0, None, width, height)
        d, e = [], []
        for i in range(cfg.M):
            du, dcu = prob.D(u0, i + 1), prob.DC(u0, i + 1)
            d.append(_aux_update(du, du, cfg.alpha[i], cfg.p[i], cfg.eps))
            e.append(_aux_update(dcu, dcu, cfg.beta[i], cfg.q[i], cfg.eps))
        return cls(u0, d, e, [np.zeros_like(x) for x in d], [np.zeros_like(x) for x in e],
                   width, height)


def _aux_update(x, old, weight, expo, eps):
    if weight == 0.0:
        return np.zeros_like(x)
    if expo == 1.0:
        return shrink(x, 1.0 / weight)
    v = 0.5 * expo * (np.abs(old) + eps) ** (expo - 2)
    return x / (1.0 + 2.0 * v / weight)


def _de_update(prob, state, u_new, cfg):
    d_new, e_new = [], []
    for i in range(cfg.M):
        m = i + 1
        d_new.append(_aux_update(prob.D(u_new, m) + state.b1[i], state.d[i],
                                 cfg.alpha[i], cfg.p[i], cfg.eps))
        e_new.append(_aux_update(prob.DC(u_new, m) + state.b2[i], state.e[i],
                                 cfg.beta[i], cfg.q[i], cfg.eps))
    return d_new, e_new


def de_update(state, u_new, cfg):
    """Pointwise update of the split variables given the new iterate ``u_new`` (flat).

    Exponent 1 uses soft thresholding at ``1/alpha_m`` (``1/beta_m``); other
    exponents use the half-quadratic weights formed from the previous split
    variables, ``d = (D u + b1) / (1 + 2 v / alpha)``.
    """
    prob = _state_problem(state)
    return _de_update(prob, state, np.asarray(u_new, dtype=np.float64), cfg)


def _state_problem(state, g=None, K=None):
    return problem_from_flat(state.u if g is None else g, K, state.width, state.height)


def _u_update(prob, state, cfg):
    mu = cfg.mu

    def apply_a(u):
        out = mu * prob.Kt(prob.Ku(u))
        for i in range(cfg.M):
            m = i + 1
            if cfg.alpha[i]:
                out += cfg.alpha[i] * prob.Dt(prob.D(u, m), m)
            if cfg.beta[i]:
                out += cfg.beta[i] * prob.DCt(prob.DC(u, m), m)
        return out

    rhs = mu * prob.Kt(prob.g)
    for i in range(cfg.M):
        m = i + 1
        if cfg.alpha[i]:
            rhs = rhs + cfg.alpha[i] * prob.Dt(state.d[i] - state.b1[i], m)
        if cfg.beta[i]:
            rhs = rhs + cfg.beta[i] * prob.DCt(state.e[i] - state.b2[i], m)
    return conjugate_gradient(apply_a, rhs, x0=state.u, max_iter=cfg.cg_iters, tol=0.0)


def u_update(state, g, K, cfg):
    """Warm-started CG steps on the u-subproblem; returns the new flat iterate.

    ``g`` is a flat observation vector and ``K`` a LinearMap or None.
    The full :class:`~dovtv.cg.CGResult` is available via :func:`u_update_result`.
    """
    return u_update_result(state, g, K, cfg).x


def u_update_result(state, g, K, cfg):
    prob = _state_problem(state, np.asarray(g, dtype=np.float64), K)
    return _u_update(prob, state, cfg)


def _bregman_update(prob, state, u_new, d_new, e_new, M):
    b1 = [state.b1[i] + prob.D(u_new, i + 1) - d_new[i] for i in range(M)]
    b2 = [state.b2[i] + prob.DC(u_new, i + 1) - e_new[i] for i in range(M)]
    return b1, b2


def bregman_update(state, u_new, d_new, e_new):
    """``b1 += D u - d`` and ``b2 += D C u - e`` for every order."""
    prob = _state_problem(state)
    return _bregman_update(prob, state, np.asarray(u_new, dtype=np.float64), d_new, e_new,
                           len(state.d))


def vtv_energy(u, g, K=None, mu=1.0, alpha=(1.0,), beta=(1.0,), p=(1.0,), q=(1.0,)):
    """``mu/2 ||K u - g||^2 + sum_m alpha_m ||D_m u||_p^p + beta_m ||D_m C u||_q^q``.

    Unmollified, with componentwise magnitudes. With ``p = q = 1`` and one
    order this is the first-order colour TV energy used for cross-checking
    the two solvers.
    """
    prob = make_problem(g, K)
    uf = to_flat(check_image(u, "u"))
    r = prob.Ku(uf) - prob.g
    total = 0.5 * mu * float(r @ r)
    for i, (a, b, pe, qe) in enumerate(zip(alpha, beta, p, q)):
        m = i + 1
        if a:
            total += a * float(np.sum(np.abs(prob.D(uf, m)) ** pe))
        if b:
            total += b * float(np.sum(np.abs(prob.DC(uf, m)) ** qe))
    return total


def bregman_energy(u, g, K, cfg):
    """The energy the split-Bregman iteration minimizes under ``cfg``."""
    alpha = tuple(1.0 if a else 0.0 for a in cfg.alpha)
    beta = tuple(1.0 if b else 0.0 for b in cfg.beta)
    return vtv_energy(u, g, K, cfg.mu, alpha, beta, cfg.p, cfg.q)


def _residual(prob, u, aux, op):
    return math.sqrt(sum(float(np.sum((x - op(u, i + 1)) ** 2)) for i, x in enumerate(aux)))


def bregman_solve(g, K=None, cfg=None, ground_truth=None, u0=None, callback=None):
    """Split-Bregman restoration of ``g`` (an (H, W, 3) image).

    Stops when the relative squared step drops below the threshold (the
    noise-aware rule when ``cfg.sigma`` is set, else ``cfg.tol``) or after
    ``cfg.max_outer`` iterations. ``callback(k, state)`` is called after
    every outer iteration.

    Returns
    -------
    Restoration
        Raw iterate (use ``.clamped`` for display) and trace with
        ``phi`` = :func:`bregman_energy` and constraint residuals.
    """
    cfg = SolverConfig() if cfg is None else cfg
    if cfg.s != 2.0:
        raise ConfigurationError(
            f"split-Bregman solver needs a quadratic data term (s=2, got s={cfg.s}); use hqa_solve"
        )
    prob = make_problem(g, K)
    g_img = from_flat(prob.g, prob.width, prob.height)
    ref = None if ground_truth is None else check_image(ground_truth, "ground_truth")
    start = prob.g if u0 is None else to_flat(check_image(u0, "u0"))
    state = BregmanState.initial(start, prob.width, prob.height, cfg)
    trace = ConvergenceTrace(threshold=outer_threshold(cfg, prob.n_pixels))
    energy = lambda uf: bregman_energy(from_flat(uf, prob.width, prob.height), g_img, K, cfg)  # noqa: E731
    trace.phi.append(energy(state.u))
    for k in range(cfg.max_outer):
        u_new = _u_update(prob, state, cfg).x
        d_new, e_new = _de_update(prob, state, u_new, cfg)
        b1, b2 = _bregman_update(prob, state, u_new, d_new, e_new, cfg.M)
        step = relative_step(state.u, u_new)
        state = BregmanState(u_new, d_new, e_new, b1, b2, prob.width, prob.height)
        phi = energy(u_new)
        if not (math.isfinite(phi) and np.all(np.isfinite(u_new))):
            raise NumericalFailure(f"iterate became non-finite at iteration {k + 1}", trace)
        trace.phi.append(phi)
        trace.rel_step.append(step)
        trace.res_d.append(_residual(prob, u_new, d_new, prob.D))
        trace.res_e.append(_residual(prob, u_new, e_new, prob.DC))
        if ref is not None:
            trace.psnr.append(iterate_psnr(ref, u_new, prob))
        if callback is not None:
            callback(k + 1, state)
        if step < trace.threshold:
            trace.converged = True
            break
    return Restoration(from_flat(state.u, prob.width, prob.height), trace)
