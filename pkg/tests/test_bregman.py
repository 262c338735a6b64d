import numpy as np
import pytest

from dovtv.bregman import (
    BregmanState,
    ConfigurationError,
    bregman_energy,
    bregman_solve,
    bregman_update,
    de_update,
    shrink,
    u_update,
    u_update_result,
    vtv_energy,
)
from dovtv.config import SolverConfig, stopping_threshold
from dovtv.degradation import add_opponent_noise, make_synthetic_isoluminant
from dovtv.image import from_flat, to_flat
from dovtv.operators import coupling_map, gradient_map
from tests._helpers import dense, random_image


def test_shrink_examples():
    assert shrink(0.5, 1) == 0.0
    assert shrink(2.0, 0.5) == 1.5
    assert shrink(-2.0, 0.5) == -1.5
    x = np.random.default_rng(0).standard_normal(50)
    assert np.array_equal(shrink(x, 0.0), x)
    with pytest.raises(ValueError):
        shrink(x, -1.0)


def _state(rng, h, w, cfg, u=None):
    u = random_image(rng, h, w) if u is None else u
    st = BregmanState.initial(to_flat(u), w, h, cfg)
    st.b1 = [rng.standard_normal(x.shape) * 0.1 for x in st.d]
    st.b2 = [rng.standard_normal(x.shape) * 0.1 for x in st.e]
    return st


def test_initial_state_shapes(rng):
    cfg = SolverConfig(M=2)
    st = BregmanState.initial(to_flat(random_image(rng, 5, 4)), 4, 5, cfg)
    assert [x.shape for x in st.d] == [(3, 2, 5, 4), (3, 4, 5, 4)]
    assert [x.shape for x in st.e] == [(3, 2, 5, 4), (3, 4, 5, 4)]
    assert all(not np.any(b) for b in st.b1 + st.b2)


def test_de_update_shrink_threshold():
    # a constant image has D u = 0, so d_new = shrink(b1, 1/alpha)
    cfg = SolverConfig(alpha=2.0, beta=4.0, p=1, q=1)
    st = BregmanState.initial(np.full(3 * 12, 0.5), 4, 3, cfg)
    st.b1 = [np.full_like(st.d[0], 0.5)]
    st.b2 = [np.full_like(st.e[0], -1.0)]
    d, e = de_update(st, st.u, cfg)
    assert np.all(d[0] == 0.0)
    assert np.allclose(e[0], -0.75)


def test_de_update_near_quadratic_limit(rng):
    cfg = SolverConfig(alpha=2.0, beta=3.0, p=1.999999, q=1.999999)
    st = _state(rng, 5, 4, cfg)
    u_new = to_flat(random_image(rng, 5, 4))
    d, e = de_update(st, u_new, cfg)
    planes = u_new.reshape(3, 5, 4)
    from dovtv.operators import coupling_planes, grad_planes

    x = grad_planes(planes, 1) + st.b1[0]
    y = grad_planes(coupling_planes(planes), 1) + st.b2[0]
    assert np.allclose(d[0], x / (1 + 2 / 2.0), rtol=1e-4, atol=1e-6)
    assert np.allclose(e[0], y / (1 + 2 / 3.0), rtol=1e-4, atol=1e-6)


def test_de_update_decreases_surrogate(rng):
    alpha, p = 1.5, 0.6
    cfg = SolverConfig(alpha=alpha, beta=alpha, p=p, q=p)
    st = _state(rng, 6, 5, cfg)
    u_new = to_flat(random_image(rng, 6, 5))
    d, _ = de_update(st, u_new, cfg)
    from dovtv.operators import grad_planes

    x = grad_planes(u_new.reshape(3, 6, 5), 1) + st.b1[0]
    v = 0.5 * p * (np.abs(st.d[0]) + cfg.eps) ** (p - 2)
    surrogate = lambda dd: v * dd**2 + 0.5 * alpha * (dd - x) ** 2  # noqa: E731
    old, new = surrogate(st.d[0]), surrogate(d[0])
    differs = ~np.isclose(st.d[0], d[0], rtol=0, atol=1e-14)
    assert np.all(new[differs] < old[differs])
    assert np.all(new <= old)


def test_u_update_without_regularization_returns_data(rng):
    cfg = SolverConfig(mu=3.0, alpha=0.0, beta=0.0)
    g = random_image(rng)
    st = BregmanState.initial(to_flat(random_image(rng)), 7, 9, cfg)
    assert np.allclose(u_update(st, to_flat(g), None, cfg), to_flat(g), atol=1e-13)


def test_u_update_matches_dense_solve(rng):
    h = w = 8
    n = h * w
    mu, alpha, beta = 4.0, (1.5, 0.5), (2.0, 0.7)
    cfg = SolverConfig(mu=mu, M=2, alpha=alpha, beta=beta, p=(0.6, 1), q=(1, 0.8), cg_iters=500)
    g = random_image(rng, h, w)
    st = _state(rng, h, w, cfg)
    C = dense(coupling_map(n))
    A = mu * np.eye(3 * n)
    rhs = mu * to_flat(g)
    for i, m in enumerate((1, 2)):
        D = dense(gradient_map(m, w, h))
        DC = D @ C
        A += alpha[i] * D.T @ D + beta[i] * DC.T @ DC
        rhs += alpha[i] * D.T @ (st.d[i] - st.b1[i]).reshape(-1)
        rhs += beta[i] * DC.T @ (st.e[i] - st.b2[i]).reshape(-1)
    expected = np.linalg.solve(A, rhs)
    assert np.max(np.abs(u_update(st, to_flat(g), None, cfg) - expected)) <= 1e-8


def test_u_update_residuals_monotone_on_denoising_instance():
    clean = make_synthetic_isoluminant(64, 64)
    g = add_opponent_noise(clean, 20, seed=0)
    for M in (1, 2):
        cfg = SolverConfig(mu=80, M=M, alpha=(2, 1)[:M], beta=(2, 1)[:M], p=0.6, q=0.6, cg_iters=30)
        st = BregmanState.initial(to_flat(g), 64, 64, cfg)
        res = u_update_result(st, to_flat(g), None, cfg)
        assert np.all(np.diff(res.residual_norms) <= 0)


def test_bregman_update_examples(rng):
    cfg = SolverConfig(M=2)
    u = to_flat(random_image(rng, 4, 3))
    st = BregmanState.initial(u, 3, 4, cfg)
    st.b1 = [rng.standard_normal(x.shape) for x in st.d]
    st.b2 = [rng.standard_normal(x.shape) for x in st.e]
    from dovtv.operators import coupling_planes, grad_planes

    planes = u.reshape(3, 4, 3)
    exact_d = [grad_planes(planes, m) for m in (1, 2)]
    exact_e = [grad_planes(coupling_planes(planes), m) for m in (1, 2)]
    b1, b2 = bregman_update(st, u, exact_d, exact_e)
    assert all(np.allclose(a, b, rtol=0, atol=1e-15) for a, b in zip(b1 + b2, st.b1 + st.b2))

    zero = BregmanState.initial(np.zeros(36), 3, 4, SolverConfig())
    ones = [np.ones_like(zero.d[0])]
    b1, b2 = bregman_update(zero, np.zeros(36), ones, [np.zeros_like(zero.e[0])])
    assert np.array_equal(b1[0], -ones[0]) and not np.any(b2[0])


def test_requires_quadratic_data_term(noisy32):
    with pytest.raises(ConfigurationError, match="hqa_solve"):
        bregman_solve(noisy32, cfg=SolverConfig(s=1.0))


@pytest.mark.parametrize("sigma", [20.0, 0.5])
def test_halts_at_first_iteration_below_threshold(sigma):
    clean = make_synthetic_isoluminant(64, 64)
    g = add_opponent_noise(clean, 20, seed=0)
    cfg = SolverConfig(mu=80, alpha=2, beta=2, p=0.6, q=0.6, sigma=sigma)
    tr = bregman_solve(g, cfg=cfg).trace
    assert tr.threshold == stopping_threshold(4096, sigma)
    assert tr.converged
    assert tr.rel_step[-1] < tr.threshold
    assert all(s >= tr.threshold for s in tr.rel_step[:-1])


def test_gray_input_stays_gray(rng):
    gray = np.repeat(rng.random((12, 10, 1)), 3, axis=2)
    cfg = SolverConfig(mu=5, alpha=2, beta=0.0, p=1, q=1, max_outer=30)
    u = bregman_solve(gray, cfg=cfg).image
    assert np.max(u.max(axis=2) - u.min(axis=2)) <= 1e-12


def test_shift_covariance(noisy32):
    cfg = SolverConfig(mu=20, M=2, alpha=(2, 1), beta=(2, 1), p=1, q=1, max_outer=20, tol=0.0)
    base = bregman_solve(noisy32, cfg=cfg).image
    shifted = bregman_solve(noisy32 + 0.25, cfg=cfg).image
    assert np.max(np.abs(shifted - base - 0.25)) <= 1e-8


def test_energy_definitions(rng):
    u, g = random_image(rng), random_image(rng)
    cfg = SolverConfig(mu=3, M=2, alpha=(2, 0), beta=(0.5, 1), p=(1, 0.5), q=(0.7, 1))
    by_hand = vtv_energy(u, g, None, 3, (1, 0), (1, 1), (1, 0.5), (0.7, 1))
    assert bregman_energy(u, g, None, cfg) == by_hand
    assert vtv_energy(g, g, None, 1.0, (0.0,), (0.0,)) == 0.0


@pytest.mark.parametrize("M", [1, 2])
def test_acceptance_run_residuals_and_energy(M):
    clean = make_synthetic_isoluminant(64, 64)
    g = add_opponent_noise(clean, 20, seed=0)
    cfg = SolverConfig(mu=80, M=M, alpha=(2, 1)[:M], beta=(2, 1)[:M], p=0.6, q=0.6)
    tr = bregman_solve(g, cfg=cfg, ground_truth=clean).trace
    assert tr.phi[-1] < tr.phi[0]
    burn = 3
    assert np.all(np.diff(tr.res_d[burn:]) <= 0)
    assert np.all(np.diff(tr.res_e[burn:]) <= 0)
    assert len(tr.psnr) == tr.n_iter


def test_deterministic(noisy32):
    cfg = SolverConfig(mu=20, M=2, alpha=(2, 1), beta=(2, 1), p=0.6, q=0.6, max_outer=10)
    a = bregman_solve(noisy32, cfg=cfg)
    b = bregman_solve(noisy32, cfg=cfg)
    assert np.array_equal(a.image, b.image) and a.trace.phi == b.trace.phi


def test_callback_and_u0(noisy32):
    seen = []
    cfg = SolverConfig(mu=20, max_outer=3, tol=0.0)
    u0 = np.full_like(noisy32, 0.5)
    bregman_solve(noisy32, cfg=cfg, u0=u0, callback=lambda k, st: seen.append((k, st.u.copy())))
    assert [k for k, _ in seen] == [1, 2, 3]
    assert from_flat(seen[0][1], 32, 32).shape == noisy32.shape
