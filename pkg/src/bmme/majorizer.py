"""Majorizers (surrogate functions) and numerical checks of their defining properties.

A majorizer ``g(x, x_tilde)`` of ``f`` touches ``f`` at ``x_tilde``
(``g(x, x) = f(x)``), lies above it everywhere (``g(x, y) >= f(x)``) and has
the same gradient at the touching point. :func:`validate_majorizer` measures
all three on sampled points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .divergence import _d_elementwise, _divergence_sum, check_beta, d_beta_prime, d_beta_second
from .linalg import min_eigenvalue

__all__ = [
    "MajorizerSpec",
    "LogDetMajorizerParams",
    "MajorizerReport",
    "jensen_beta_majorizer",
    "jensen_matrix_majorizer",
    "jensen_hessian_diag",
    "jensen_minimize",
    "logdet_params",
    "logdet_majorizer",
    "lipschitz_majorizer",
    "bregman_majorizer",
    "validate_majorizer",
    "three_point_check",
    "fd_gradient",
]


@dataclass(frozen=True)
class MajorizerSpec:
    """A surrogate ``g`` as a bundle of closures.

    evaluate(x, x_tilde) -> float
    gradient_at_first(x, x_tilde) -> array, the gradient of g in its first slot
    minimize(x_tilde) -> argmin of g(., x_tilde) over the feasible set
    objective(x) -> f(x), the function being majorized
    """

    kind: str
    evaluate: Callable
    gradient_at_first: Callable
    minimize: Callable
    objective: Callable | None = None
    params: dict = field(default_factory=dict)


def _jensen_terms(v, W, h, h_tilde, beta):
    v_tilde = W @ h_tilde
    ratio = h / h_tilde
    Y = v_tilde[:, None] * ratio[None, :]  # argument of d_beta per (i, k)
    weights = W * h_tilde[None, :] / v_tilde[:, None]
    return v_tilde, Y, weights


def jensen_minimize(v, W, h_tilde, beta, epsilon):
    """Closed-form minimizer of the Jensen surrogate over ``h >= epsilon``.

    Works column-wise too: pass ``v`` of shape (m, n) and ``h_tilde`` of
    shape (r, n).
    """
    v_tilde = W @ h_tilde
    if beta == 1.0:
        num = W.T @ (v / v_tilde)
        den = W.sum(axis=0)
        den = den[:, None] if num.ndim == 2 else den
    else:
        p = v_tilde ** (beta - 2.0)
        num = W.T @ (v * p)
        den = W.T @ (v_tilde * p)
    return np.maximum(epsilon, h_tilde * num / den)


def jensen_beta_majorizer(v, W, h_tilde=None, beta=1.0, epsilon=np.finfo(float).eps):
    """Jensen surrogate of ``h -> D_beta(v, W h)``.

    ``g(h, h~) = sum_ik (W_ik h~_k / v~_i) d_beta(v_i, v~_i h_k / h~_k)`` with
    ``v~ = W h~``. Its minimizer over ``{h >= epsilon}`` is the
    multiplicative update.
    """
    beta = check_beta(beta)
    v = np.asarray(v, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if np.any(v < 0) or np.any(W < 0):
        raise ValueError("v and W must be nonnegative")

    def _check(h, h_tilde):
        if np.any(h <= 0) or np.any(h_tilde <= 0):
            raise ValueError("Jensen surrogate needs h > 0 and h_tilde > 0")
        if np.any(W @ h_tilde <= 0):
            raise ValueError("W h_tilde must be positive")

    def objective(h):
        h = np.asarray(h, dtype=np.float64)
        return _divergence_sum(v, W @ h, beta)

    def evaluate(h, h_tilde):
        h = np.asarray(h, dtype=np.float64)
        h_tilde = np.asarray(h_tilde, dtype=np.float64)
        _check(h, h_tilde)
        _, Y, weights = _jensen_terms(v, W, h, h_tilde, beta)
        Vb = np.broadcast_to(v[:, None], Y.shape)
        vals = _d_elementwise(Vb, Y, beta)
        return float(np.sum(weights * vals))

    def gradient_at_first(h, h_tilde):
        h = np.asarray(h, dtype=np.float64)
        h_tilde = np.asarray(h_tilde, dtype=np.float64)
        _check(h, h_tilde)
        _, Y, _ = _jensen_terms(v, W, h, h_tilde, beta)
        # d/dh_k of weights * d(v, v~ h_k / h~_k) = W_ik d'(v_i, Y_ik)
        return np.sum(W * d_beta_prime(v[:, None], Y, beta), axis=0)

    def minimize(h_tilde):
        h_tilde = np.asarray(h_tilde, dtype=np.float64)
        return jensen_minimize(v, W, h_tilde, beta, epsilon)

    return MajorizerSpec(
        kind="jensen-beta",
        evaluate=evaluate,
        gradient_at_first=gradient_at_first,
        minimize=minimize,
        objective=objective,
        params={"beta": beta, "epsilon": epsilon, "anchor": h_tilde},
    )


def jensen_matrix_majorizer(X, W, beta, epsilon):
    """Column-separable Jensen surrogate of ``H -> D_beta(X, W H)``.

    The surrogate value is the sum of :func:`jensen_beta_majorizer` over the
    columns of X; minimization is the matrix multiplicative update.
    """
    beta = check_beta(beta)
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    cols = None

    def _columns():
        nonlocal cols
        if cols is None:
            cols = [jensen_beta_majorizer(X[:, j], W, None, beta, epsilon) for j in range(X.shape[1])]
        return cols

    def objective(H):
        return _divergence_sum(X, W @ H, beta)

    def evaluate(H, H_tilde):
        return float(sum(g.evaluate(H[:, j], H_tilde[:, j]) for j, g in enumerate(_columns())))

    def gradient_at_first(H, H_tilde):
        return np.column_stack([g.gradient_at_first(H[:, j], H_tilde[:, j]) for j, g in enumerate(_columns())])

    def minimize(H_tilde):
        return jensen_minimize(X, W, H_tilde, beta, epsilon)

    return MajorizerSpec(
        kind="jensen-beta",
        evaluate=evaluate,
        gradient_at_first=gradient_at_first,
        minimize=minimize,
        objective=objective,
        params={"beta": beta, "epsilon": epsilon},
    )


def jensen_hessian_diag(v, W, h, h_tilde, beta):
    """Diagonal Hessian of the Jensen surrogate in h (the surrogate is separable).

    ``sum_i (W_ik v~_i / h~_k) d''_beta(v_i, v~_i h_k / h~_k)``.
    """
    beta = check_beta(beta)
    v = np.asarray(v, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    h_tilde = np.asarray(h_tilde, dtype=np.float64)
    if np.any(h <= 0) or np.any(h_tilde <= 0):
        raise ValueError("h and h_tilde must be positive")
    v_tilde = W @ h_tilde
    Y = v_tilde[:, None] * (h / h_tilde)[None, :]
    coef = W * v_tilde[:, None] / h_tilde[None, :]
    return np.sum(coef * d_beta_second(v[:, None], Y, beta), axis=0)


@dataclass(frozen=True)
class LogDetMajorizerParams:
    delta: float
    lambda1: float
    L_phi1: float
    A: np.ndarray


def logdet_params(W_tilde, delta, lambda1=1.0):
    """Curvature constant and gradient of ``logdet(W^T W + delta I)`` at `W_tilde`.

    ``L = 2 ||(W~^T W~ + delta I)^{-1}||_2 = 2 / (lambda_min(W~^T W~) + delta)``
    and ``A = 2 W~ (W~^T W~ + delta I)^{-1}``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    W_tilde = np.asarray(W_tilde, dtype=np.float64)
    G = W_tilde.T @ W_tilde
    lam_min = max(min_eigenvalue(G), 0.0)
    L = 2.0 / (lam_min + delta)
    M = G + delta * np.eye(G.shape[0])
    A = 2.0 * np.linalg.solve(M, W_tilde.T).T
    return LogDetMajorizerParams(delta=float(delta), lambda1=float(lambda1), L_phi1=L, A=A)


def logdet_majorizer(W_tilde, delta, lambda1=1.0, epsilon=None):
    """Quadratic majorizer of ``lambda1 * logdet(W^T W + delta I)``.

    ``g(W, W~) = phi(W~) + <grad phi(W~), W - W~> + (L/2) ||W - W~||^2``
    scaled by `lambda1`. `minimize` returns the (optionally floored) gradient
    step, which is the exact minimizer since g is separable.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    r = np.asarray(W_tilde).shape[1]
    eye = np.eye(r)

    def phi(W):
        W = np.asarray(W, dtype=np.float64)
        _, ld = np.linalg.slogdet(W.T @ W + delta * eye)
        return lambda1 * float(ld)

    cache = {}

    def _params(W_t):
        key = np.asarray(W_t, dtype=np.float64).tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = logdet_params(W_t, delta, lambda1)
        return cache[key]

    def evaluate(W, W_t):
        W = np.asarray(W, dtype=np.float64)
        W_t = np.asarray(W_t, dtype=np.float64)
        p = _params(W_t)
        D = W - W_t
        return phi(W_t) + lambda1 * (np.vdot(p.A, D) + 0.5 * p.L_phi1 * np.vdot(D, D))

    def gradient_at_first(W, W_t):
        W = np.asarray(W, dtype=np.float64)
        W_t = np.asarray(W_t, dtype=np.float64)
        p = _params(W_t)
        return lambda1 * (p.A + p.L_phi1 * (W - W_t))

    def minimize(W_t):
        W_t = np.asarray(W_t, dtype=np.float64)
        p = _params(W_t)
        out = W_t - p.A / p.L_phi1
        return out if epsilon is None else np.maximum(epsilon, out)

    return MajorizerSpec(
        kind="logdet-quadratic",
        evaluate=evaluate,
        gradient_at_first=gradient_at_first,
        minimize=minimize,
        objective=phi,
        params={"delta": delta, "lambda1": lambda1, "params": _params(W_tilde)},
    )


def lipschitz_majorizer(f, grad, L, lower=None):
    """``f(y) + <grad f(y), x - y> + (L/2)||x - y||^2``; minimize is a gradient step."""

    def evaluate(x, y):
        d = np.asarray(x, dtype=np.float64) - y
        return float(f(y) + np.vdot(grad(y), d) + 0.5 * L * np.vdot(d, d))

    def gradient_at_first(x, y):
        return grad(y) + L * (np.asarray(x, dtype=np.float64) - y)

    def minimize(y):
        x = np.asarray(y, dtype=np.float64) - grad(y) / L
        return x if lower is None else np.maximum(lower, x)

    return MajorizerSpec("lipschitz", evaluate, gradient_at_first, minimize, objective=f, params={"L": L})


def bregman_majorizer(f, grad, kappa, grad_kappa, L, argmin=None):
    """Bregman majorizer with kernel `kappa`; requires ``L kappa - f`` convex.

    `argmin(y)` must be supplied to minimize; there is no generic closed form.
    """

    def evaluate(x, y):
        x = np.asarray(x, dtype=np.float64)
        d = x - y
        breg = kappa(x) - kappa(y) - np.vdot(grad_kappa(y), d)
        return float(f(y) + np.vdot(grad(y), d) + L * breg)

    def gradient_at_first(x, y):
        return grad(y) + L * (grad_kappa(np.asarray(x, dtype=np.float64)) - grad_kappa(y))

    def minimize(y):
        if argmin is None:
            raise NotImplementedError("bregman_majorizer needs an explicit argmin")
        return argmin(y)

    return MajorizerSpec("bregman", evaluate, gradient_at_first, minimize, objective=f, params={"L": L})


def fd_gradient(fun, x, rel_step=1e-6):
    """Central finite-difference gradient with step ``rel_step * (1 + |x_k|)``."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for k in range(flat.size):
        h = rel_step * (1.0 + abs(flat[k]))
        orig = flat[k]
        flat[k] = orig + h
        fp = fun(x)
        flat[k] = orig - h
        fm = fun(x)
        flat[k] = orig
        gflat[k] = (fp - fm) / (2.0 * h)
    return g


@dataclass
class MajorizerReport:
    n_samples: int
    tightness: float  # max |g(y, y) - f(y)| / (1 + |f(y)|)
    domination: float  # min (g(x, y) - f(x)) / (1 + |f(x)|); negative means violated
    gradient_mismatch: float  # max ||grad_1 g(y, y) - grad f(y)|| / (1 + ||grad f(y)||)
    analytic_gradient_error: float  # gradient_at_first vs finite differences of g
    tol: float

    @property
    def passed(self):
        return (
            self.tightness <= self.tol
            and self.domination >= -self.tol
            and self.gradient_mismatch <= self.tol
            and self.analytic_gradient_error <= self.tol
        )


def validate_majorizer(spec, f, sampler, n_samples=50, tol=1e-6, rng=None):
    """Check tightness, domination and first-order agreement on random points.

    `sampler(rng)` must return a feasible point; each sample draws an anchor
    ``y`` and a test point ``x``. Gradients are compared through central
    finite differences of both ``f`` and ``g(., y)``.
    """
    rng = np.random.default_rng(rng)
    tight = 0.0
    dom = np.inf
    gmis = 0.0
    gerr = 0.0
    for _ in range(n_samples):
        y = np.asarray(sampler(rng), dtype=np.float64)
        x = np.asarray(sampler(rng), dtype=np.float64)
        fy = f(y)
        fx = f(x)
        tight = max(tight, abs(spec.evaluate(y, y) - fy) / (1.0 + abs(fy)))
        dom = min(dom, (spec.evaluate(x, y) - fx) / (1.0 + abs(fx)))
        fd_f = fd_gradient(f, y)
        fd_g = fd_gradient(lambda z: spec.evaluate(z, y), y)
        scale = 1.0 + np.linalg.norm(fd_f)
        gmis = max(gmis, np.linalg.norm(fd_g - fd_f) / scale)
        gerr = max(gerr, np.linalg.norm(spec.gradient_at_first(y, y) - fd_g) / scale)
    return MajorizerReport(n_samples, tight, float(dom), gmis, gerr, tol)


def three_point_check(spec, phi, z, u):
    """Residual of the three-point inequality for one majorizer step.

    With ``xi = g(., z)``, ``B`` its Bregman distance and ``z+ = spec.minimize(z)``
    returns ``phi(u) + B(u, z) - phi(z+) - B(z+, z) - B(u, z+)``, which is
    nonnegative for convex phi and xi. When `phi` is None the linearization of
    ``f`` at ``z`` is used, so that ``phi + B(., z)`` is exactly ``g(., z)``.
    """
    z = np.asarray(z, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    g_z = spec.evaluate(z, z)
    grad_z = spec.gradient_at_first(z, z)
    if phi is None:
        def phi(x):
            return g_z + np.vdot(grad_z, np.asarray(x) - z)

    def xi(x):
        return spec.evaluate(x, z)

    def bregman(a, b):
        return xi(a) - xi(b) - np.vdot(spec.gradient_at_first(b, z), a - b)

    z_plus = spec.minimize(z)
    return float(phi(u) + bregman(u, z) - phi(z_plus) - bregman(z_plus, z) - bregman(u, z_plus))
