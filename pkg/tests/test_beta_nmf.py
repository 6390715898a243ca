import numpy as np
import pytest

from bmme.beta_nmf import (
    EPS,
    BetaNmfConfig,
    init_factors,
    iterate_bounds,
    jensen_hessian_matrix,
    kkt_residual,
    mu_step,
    mu_step_W,
    solve_mu,
    solve_mue,
)
from bmme.core import RunConfig
from bmme.divergence import D_beta, grad_H, grad_W
from bmme.extrapolation import ExtrapolationState
from bmme.majorizer import jensen_hessian_diag
from bmme.matrixio import SyntheticSpec, synth_lowrank

from .oracles import jensen_argmin_numeric, jensen_surrogate

BETAS = [1.0, 1.25, 1.5, 2.0]


def test_scalar_examples():
    # 1x1 problems: KL gives h * x / (w h), Euclidean gives h * w x / (w w h)
    assert mu_step(np.array([[2.0]]), np.array([[1.0]]), np.array([[1.0]]), 1.0)[0, 0] == 2.0
    assert mu_step(np.array([[6.0]]), np.array([[2.0]]), np.array([[1.0]]), 2.0)[0, 0] == 3.0


@pytest.mark.parametrize("beta", BETAS)
def test_mu_step_matches_numeric_minimizer(beta):
    rng = np.random.default_rng(int(beta * 100))
    X = rng.random((4, 3)) * 2
    W = rng.random((4, 2)) + 0.05
    Ht = rng.random((2, 3)) + 0.05
    H = mu_step(X, W, Ht, beta)
    for j in range(3):
        ref = jensen_argmin_numeric(X[:, j], W, Ht[:, j], beta, EPS)
        g = lambda h: jensen_surrogate(X[:, j], W, h, Ht[:, j], beta)  # noqa: E731
        assert g(H[:, j]) <= g(ref) + 1e-10 * (1 + abs(g(ref)))


@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_fast_paths_equal_general_formula(beta):
    rng = np.random.default_rng(0)
    X = rng.random((5, 4))
    W, H = rng.random((5, 3)) + 0.1, rng.random((3, 4)) + 0.1
    V = W @ H
    general = H * (W.T @ (X * V ** (beta - 2))) / (W.T @ V ** (beta - 1))
    np.testing.assert_allclose(mu_step(X, W, H, beta), general, rtol=1e-13)


def test_W_update_by_transposition():
    rng = np.random.default_rng(1)
    X = rng.random((5, 4))
    W, H = rng.random((5, 3)) + 0.1, rng.random((3, 4)) + 0.1
    np.testing.assert_allclose(mu_step_W(X, W, H, 1.5), mu_step(X.T, H.T, W.T, 1.5).T)


def test_floor_enforced():
    X = np.array([[0.0, 1.0], [0.0, 2.0]])
    W = np.ones((2, 1))
    H = mu_step(X, W, np.ones((1, 2)), 1.0, epsilon=1e-9)
    assert H[0, 0] == 1e-9
    with pytest.raises(ValueError):
        mu_step(X, W, np.zeros((1, 2)), 1.0)


def test_exact_factorization_is_a_fixed_point():
    X, W, H = synth_lowrank(SyntheticSpec(6, 5, 2, noise="none", seed=3))
    for beta in BETAS:
        np.testing.assert_allclose(mu_step(X, W, H, beta), H, rtol=1e-13)
        assert kkt_residual(X, W, H, beta) < 1e-12


def test_kkt_residual_floor_convention():
    # a floored entry with positive gradient contributes nothing
    X = np.array([[1.0, 0.0]])
    W = np.array([[1.0]])
    H = np.array([[1.0, EPS]])
    G = grad_H(X, W, H, 1.0)
    assert G[0, 1] > 0
    assert kkt_residual(X, W, H, 1.0) == pytest.approx(abs(grad_W(X, W, H, 1.0)).max(), abs=1e-15)
    # the same entry slightly above the floor counts in full
    H2 = np.array([[1.0, 1e-3]])
    assert kkt_residual(X, W, H2, 1.0) >= grad_H(X, W, H2, 1.0)[0, 1]


def test_kkt_residual_matches_projected_gradient_at_interior_points():
    rng = np.random.default_rng(4)
    X = rng.random((4, 5))
    W, H = rng.random((4, 2)) + 0.1, rng.random((2, 5)) + 0.1
    ref = max(abs(grad_W(X, W, H, 1.5)).max(), abs(grad_H(X, W, H, 1.5)).max())
    assert kkt_residual(X, W, H, 1.5) == pytest.approx(ref, rel=1e-13)


def test_init_factors():
    X = np.full((4, 6), 3.0)
    W, H = init_factors(X, 2, seed=5)
    assert W.shape == (4, 2) and H.shape == (2, 6)
    V = W @ H
    assert np.vdot(X, V) == pytest.approx(np.vdot(V, V))
    W2, H2 = init_factors(X, 2, seed=5, init="uniform-random")
    np.testing.assert_array_equal(W, W2)
    assert H2.max() <= 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        BetaNmfConfig(beta=3.0)
    with pytest.raises(ValueError):
        BetaNmfConfig(rank=0)
    with pytest.raises(ValueError):
        BetaNmfConfig(init="user")
    with pytest.raises(ValueError):
        BetaNmfConfig(epsilon=0.0)


def test_user_init_shapes():
    X = np.ones((3, 4))
    cfg = BetaNmfConfig(rank=2, init="user", W0=np.ones((3, 2)), H0=np.ones((3, 4)))
    with pytest.raises(ValueError):
        solve_mu(X, cfg, RunConfig(max_iter=1))


@pytest.mark.parametrize("beta", BETAS)
def test_mu_descends(beta):
    X, _, _ = synth_lowrank(SyntheticSpec(12, 15, 3, seed=7))
    _, trace = solve_mu(X, BetaNmfConfig(beta=beta, rank=3, seed=1), RunConfig(max_iter=100))
    obj = trace.objectives
    assert np.all(obj[1:] <= obj[:-1] * (1 + 1e-10))


def test_first_iteration_of_mue_is_mu():
    X, _, _ = synth_lowrank(SyntheticSpec(8, 9, 2, seed=2))
    cfg = BetaNmfConfig(beta=1.5, rank=2, seed=3)
    p1, _ = solve_mu(X, cfg, RunConfig(max_iter=1))
    p2, _ = solve_mue(X, cfg, RunConfig(max_iter=1))
    np.testing.assert_array_equal(p1.W, p2.W)
    np.testing.assert_array_equal(p1.H, p2.H)


def test_mue_with_schedule_none_is_mu():
    X, _, _ = synth_lowrank(SyntheticSpec(8, 9, 2, seed=2))
    cfg = BetaNmfConfig(beta=1.0, rank=2, seed=3)
    rc = RunConfig(max_iter=40, record_wall_time=False)
    _, t1 = solve_mu(X, cfg, rc)
    _, t2 = solve_mue(X, cfg, rc, ExtrapolationState("none"))
    assert t1.records == t2.records


def test_mue_faster_than_mu():
    X, _, _ = synth_lowrank(SyntheticSpec(50, 80, 5, seed=0))
    its = []
    for seed in range(10):
        cfg = BetaNmfConfig(beta=1.5, rank=5, seed=seed)
        _, t_mu = solve_mu(X, cfg, RunConfig(max_iter=200))
        _, t_mue = solve_mue(X, cfg, RunConfig(max_iter=200))
        below = np.nonzero(t_mue.objectives < t_mu[-1].objective)[0]
        its.append(below[0] if below.size else 10**9)
    assert np.median(its) < 200


def test_iterates_stay_within_bounds():
    X, _, _ = synth_lowrank(SyntheticSpec(10, 12, 3, seed=4))
    eps = 1e-10
    pair, _ = solve_mue(X, BetaNmfConfig(beta=1.0, rank=3, epsilon=eps), RunConfig(max_iter=300))
    Wb, Hb = iterate_bounds(X, eps)
    assert pair.W.min() >= eps and pair.H.min() >= eps
    assert np.all(pair.W <= Wb) and np.all(pair.H <= Hb)


def test_hessian_matrix_matches_vector_version():
    rng = np.random.default_rng(6)
    X = rng.random((4, 3))
    W = rng.random((4, 2)) + 0.1
    H, Hh = rng.random((2, 3)) + 0.1, rng.random((2, 3)) + 0.1
    M = jensen_hessian_matrix(X, W, H, Hh, 1.25)
    for j in range(3):
        np.testing.assert_allclose(M[:, j], jensen_hessian_diag(X[:, j], W, H[:, j], Hh[:, j], 1.25), rtol=1e-12)


def test_residual_recorded_in_trace():
    X, _, _ = synth_lowrank(SyntheticSpec(6, 8, 2, seed=1))
    pair, trace = solve_mu(X, BetaNmfConfig(rank=2), RunConfig(max_iter=10, compute_residual_every=5))
    res = [r.kkt_residual for r in trace]
    assert res[0] is not None and res[5] is not None and res[1] is None
    assert res[-1] == kkt_residual(X, pair.W, pair.H, 1.0)
    assert trace[-1].objective == pytest.approx(D_beta(X, pair.W, pair.H, 1.0), rel=1e-12)
