import numpy as np
import pytest

from bmme.beta_nmf import mu_step
from bmme.divergence import D_beta, _divergence_sum, logdet_volume
from bmme.majorizer import (
    MajorizerSpec,
    bregman_majorizer,
    fd_gradient,
    jensen_beta_majorizer,
    jensen_hessian_diag,
    jensen_matrix_majorizer,
    lipschitz_majorizer,
    logdet_majorizer,
    logdet_params,
    three_point_check,
    validate_majorizer,
)

from .oracles import jensen_argmin_numeric, jensen_surrogate

BETAS = [1.0, 1.25, 1.5, 2.0]


def _instance(seed, m=5, r=3):
    rng = np.random.default_rng(seed)
    v = rng.random(m) * 3
    v[0] = 0.0
    W = rng.random((m, r)) + 0.05
    return v, W


@pytest.mark.parametrize("beta", BETAS)
def test_jensen_surrogate_passes_validator(beta):
    v, W = _instance(0)
    spec = jensen_beta_majorizer(v, W, beta=beta)
    rep = validate_majorizer(spec, spec.objective, lambda g: g.uniform(0.05, 3, 3), n_samples=30, rng=1)
    assert rep.passed, rep


@pytest.mark.parametrize("beta", BETAS)
def test_jensen_value_matches_oracle(beta):
    v, W = _instance(1)
    spec = jensen_beta_majorizer(v, W, beta=beta)
    h, ht = np.array([0.3, 1.2, 2.0]), np.array([1.0, 0.5, 0.7])
    assert spec.evaluate(h, ht) == pytest.approx(jensen_surrogate(v, W, h, ht, beta), rel=1e-12)


@pytest.mark.parametrize("beta", BETAS)
def test_mu_step_minimizes_jensen_surrogate(beta):
    v, W = _instance(2)
    ht = np.array([0.4, 1.5, 0.9])
    eps = np.finfo(float).eps
    h_mu = mu_step(v[:, None], W, ht[:, None], beta)[:, 0]
    h_num = jensen_argmin_numeric(v, W, ht, beta, eps)
    g = jensen_beta_majorizer(v, W, beta=beta)
    assert g.evaluate(h_mu, ht) <= g.evaluate(h_num, ht) + 1e-12
    np.testing.assert_array_equal(h_mu, g.minimize(ht))


def test_matrix_surrogate_is_sum_of_columns():
    rng = np.random.default_rng(3)
    X = rng.random((4, 5))
    W = rng.random((4, 2)) + 0.1
    H, Ht = rng.random((2, 5)) + 0.1, rng.random((2, 5)) + 0.1
    spec = jensen_matrix_majorizer(X, W, 1.5, 1e-16)
    expected = sum(jensen_surrogate(X[:, j], W, H[:, j], Ht[:, j], 1.5) for j in range(5))
    assert spec.evaluate(H, Ht) == pytest.approx(expected, rel=1e-12)
    assert spec.evaluate(Ht, Ht) == pytest.approx(D_beta(X, W, Ht, 1.5), rel=1e-12)


@pytest.mark.parametrize("beta", BETAS)
def test_jensen_hessian_diag(beta):
    v, W = _instance(4)
    h, ht = np.array([0.3, 1.2, 2.0]), np.array([1.0, 0.5, 0.7])
    g = jensen_beta_majorizer(v, W, beta=beta)
    fd = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1e-4 * h[k]
        fd[k] = (g.evaluate(h + e, ht) - 2 * g.evaluate(h, ht) + g.evaluate(h - e, ht)) / e[k] ** 2
    np.testing.assert_allclose(jensen_hessian_diag(v, W, h, ht, beta), fd, rtol=1e-5)


def test_logdet_params():
    rng = np.random.default_rng(5)
    Wt = rng.random((6, 3))
    p = logdet_params(Wt, 0.1)
    assert p.L_phi1 <= 2 / 0.1
    assert p.L_phi1 == pytest.approx(2 / (np.linalg.eigvalsh(Wt.T @ Wt)[0] + 0.1), rel=1e-12)
    np.testing.assert_allclose(p.A, fd_gradient(lambda W: logdet_volume(W, 0.1), Wt), rtol=1e-6)
    with pytest.raises(ValueError):
        logdet_params(Wt, 0.0)


def test_logdet_majorizer_validator_and_zero_anchor():
    rng = np.random.default_rng(6)
    Wt = rng.random((5, 2))
    spec = logdet_majorizer(Wt, 0.2, lambda1=0.7)
    rep = validate_majorizer(spec, spec.objective, lambda g: g.random((5, 2)), n_samples=20, rng=2)
    assert rep.passed, rep
    # at W~ = 0 the bound L = 2/delta is attained
    assert logdet_params(np.zeros((4, 2)), 0.5).L_phi1 == 4.0


def test_minimize_is_a_gradient_step():
    rng = np.random.default_rng(7)
    Wt = rng.random((4, 2))
    spec = logdet_majorizer(Wt, 0.1)
    p = spec.params["params"]
    np.testing.assert_allclose(spec.minimize(Wt), Wt - p.A / p.L_phi1)
    floored = logdet_majorizer(Wt, 0.1, epsilon=0.3).minimize(Wt)
    np.testing.assert_array_equal(floored, np.maximum(0.3, Wt - p.A / p.L_phi1))


def _quadratic():
    Q = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    return Q, b, (lambda x: 0.5 * x @ Q @ x - b @ x), (lambda x: Q @ x - b), np.linalg.eigvalsh(Q)[-1]


def test_lipschitz_majorizer_and_broken_variants():
    Q, b, f, grad, L = _quadratic()
    sampler = lambda g: g.standard_normal(2) * 3  # noqa: E731
    assert validate_majorizer(lipschitz_majorizer(f, grad, L), f, sampler, rng=0).passed

    too_flat = validate_majorizer(lipschitz_majorizer(f, grad, 0.5 * L), f, sampler, rng=0)
    assert not too_flat.passed and too_flat.domination < -1e-6

    wrong_tangent = lipschitz_majorizer(f, lambda x: grad(x) + 1.0, 10 * L)
    rep = validate_majorizer(wrong_tangent, f, sampler, rng=0)
    assert not rep.passed and rep.gradient_mismatch > 1e-3

    good = lipschitz_majorizer(f, grad, L)
    shifted = MajorizerSpec("shifted", lambda x, y: good.evaluate(x, y) - 1e-3, good.gradient_at_first, good.minimize)
    rep = validate_majorizer(shifted, f, sampler, rng=0)
    assert not rep.passed and rep.tightness > 1e-6


def test_analytic_gradient_error_detected():
    Q, b, f, grad, L = _quadratic()
    good = lipschitz_majorizer(f, grad, L)
    bad = MajorizerSpec("bad-grad", good.evaluate, lambda x, y: 2 * good.gradient_at_first(x, y), good.minimize)
    rep = validate_majorizer(bad, f, lambda g: g.standard_normal(2), rng=0)
    assert rep.analytic_gradient_error > 1e-3 and not rep.passed


def test_three_point_inequality():
    Q, b, f, grad, L = _quadratic()
    spec = lipschitz_majorizer(f, grad, L)
    rng = np.random.default_rng(8)
    for _ in range(50):
        z, u = rng.standard_normal(2) * 4, rng.standard_normal(2) * 4
        assert three_point_check(spec, None, z, u) >= -1e-10


def test_three_point_for_jensen_surrogate():
    v, W = _instance(9)
    spec = jensen_beta_majorizer(v, W, beta=1.5, epsilon=1e-12)
    rng = np.random.default_rng(9)
    for _ in range(20):
        z, u = rng.uniform(0.1, 2, 3), rng.uniform(0.1, 2, 3)
        assert three_point_check(spec, None, z, u) >= -1e-9


def test_bregman_majorizer():
    # f(x) = sum x log x - x is 1-smooth relative to the same kernel
    f = lambda x: float(np.sum(x * np.log(x) - x))  # noqa: E731
    grad = np.log
    spec = bregman_majorizer(f, grad, f, grad, 1.0, argmin=lambda y: y)
    rep = validate_majorizer(spec, f, lambda g: g.uniform(0.1, 3, 3), rng=0)
    assert rep.passed
    with pytest.raises(NotImplementedError):
        bregman_majorizer(f, grad, f, grad, 1.0).minimize(np.ones(3))


def test_jensen_rejects_nonpositive_points():
    v, W = _instance(10)
    spec = jensen_beta_majorizer(v, W, beta=1.0)
    with pytest.raises(ValueError):
        spec.evaluate(np.array([0.0, 1.0, 1.0]), np.ones(3))
    with pytest.raises(ValueError):
        jensen_beta_majorizer(-v - 1, W)


def test_divergence_sum_consistency():
    v, W = _instance(11)
    h = np.array([0.2, 0.4, 0.6])
    spec = jensen_beta_majorizer(v, W, beta=1.25)
    assert spec.objective(h) == pytest.approx(_divergence_sum(v, W @ h, 1.25))
