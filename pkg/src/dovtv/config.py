"""Solver parameters and per-iteration convergence records."""

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ._validation import check_scalar


def _as_tuple(value, m, name):
    if np.isscalar(value):
        return (float(value),) * m
    out = tuple(float(v) for v in value)
    if len(out) == 1:
        out = out * m
    if len(out) != m:
        raise ValueError(f"{name} needs {m} per-order entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class SolverConfig:
    """Energy and solver parameters.

    ``alpha``, ``beta``, ``p`` and ``q`` are per derivative order and may be
    given as scalars (or one-entry sequences), which are broadcast to ``M``
    entries.

    In the half-quadratic solver ``alpha``/``beta`` weight the regularizers.
    In the split-Bregman solver they are the penalty weights of the
    constraints ``d = D u`` and ``e = D C u`` and the regularizers carry unit
    weight; the shrinkage threshold is ``1/alpha``.

    ``hqa_jacobi`` switches on diagonal preconditioning of the half-quadratic
    inner CG; ``sigma`` (8-bit units) selects the noise-aware stopping
    threshold, otherwise ``tol`` is used.
    """

    mu: float = 1.0
    s: float = 2.0
    M: int = 1
    alpha: tuple = (1.0,)
    beta: tuple = (1.0,)
    p: tuple = (1.0,)
    q: tuple = (1.0,)
    eps: float = 1e-20
    max_outer: int = 500
    cg_iters: int = 5
    cg_tol: float = 1e-10
    hqa_cg_iters: int = 500
    hqa_jacobi: bool = True
    sigma: float | None = None
    tol: float = 1e-6

    def __post_init__(self):
        if self.M not in (1, 2):
            raise ValueError(f"M must be 1 or 2, got {self.M}")
        for name in ("alpha", "beta", "p", "q"):
            object.__setattr__(self, name, _as_tuple(getattr(self, name), self.M, name))
        check_scalar(self.mu, "mu", low=0.0, low_open=True)
        check_scalar(self.s, "s", low=0.0, high=2.0, low_open=True)
        check_scalar(self.eps, "eps", low=0.0, low_open=True)
        for a in self.alpha + self.beta:
            check_scalar(a, "alpha/beta", low=0.0)
        for e in self.p + self.q:
            # p = 2 is the quadratic (Tikhonov) regularizer
            check_scalar(e, "p/q", low=0.0, high=2.0, low_open=True)
        if int(self.max_outer) < 1 or int(self.cg_iters) < 1 or int(self.hqa_cg_iters) < 1:
            raise ValueError("iteration caps must be positive")
        check_scalar(self.cg_tol, "cg_tol", low=0.0)
        check_scalar(self.tol, "tol", low=0.0)
        if self.sigma is not None:
            check_scalar(self.sigma, "sigma", low=0.0)
        object.__setattr__(self, "hqa_jacobi", bool(self.hqa_jacobi))

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def stopping_threshold(n_pixels, sigma):
    """Relative-step threshold ``0.9 sqrt(3 N sigma^2) / 255^2`` for 8-bit ``sigma``."""
    return 0.9 * math.sqrt(3 * n_pixels * sigma**2) / 255.0**2


def outer_threshold(cfg, n_pixels):
    if cfg.sigma is not None:
        return stopping_threshold(n_pixels, cfg.sigma)
    return cfg.tol


def relative_step(u_old, u_new):
    den = float(u_new @ u_new)
    diff = u_old - u_new
    num = float(diff @ diff)
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


@dataclass
class ConvergenceTrace:
    """Per-outer-iteration record.

    ``phi[0]`` is the energy of the initial guess; entry ``k`` of every other
    list belongs to outer iteration ``k + 1``.
    """

    phi: list = field(default_factory=list)
    rel_step: list = field(default_factory=list)
    psnr: list = field(default_factory=list)
    res_d: list = field(default_factory=list)
    res_e: list = field(default_factory=list)
    threshold: float = math.nan
    converged: bool = False

    @property
    def n_iter(self):
        return len(self.rel_step)

    def to_csv(self):
        """CSV text with columns iter, phi, rel_step, psnr (+ res_d, res_e when recorded)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        extra = bool(self.res_d)
        header = ["iter", "phi", "rel_step", "psnr"] + (["res_d", "res_e"] if extra else [])
        writer.writerow(header)
        for k in range(self.n_iter):
            psnr = self.psnr[k] if k < len(self.psnr) else None
            row = [k + 1, repr(float(self.phi[k + 1])), repr(float(self.rel_step[k])),
                   "" if psnr is None else repr(float(psnr))]
            if extra:
                row += [repr(float(self.res_d[k])), repr(float(self.res_e[k]))]
            writer.writerow(row)
        return buf.getvalue()
