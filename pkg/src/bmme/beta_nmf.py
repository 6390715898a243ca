"""Multiplicative updates for beta-NMF, plain (MU) and extrapolated (MUe).

Both solvers are instances of :func:`bmme.core.run` with two blocks, W then
H. The H update is the minimizer of the column-wise Jensen surrogate,

    H <- max(eps, H~ * [W^T (X / (W H~)^(2-b))] / [W^T (W H~)^(b-1)]),

and the W update is the same formula on the transposed problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .divergence import D_beta, _baseline_divergence, _divergence_sum, check_beta
from .extrapolation import ExtrapolationState
from .majorizer import MajorizerSpec, jensen_matrix_majorizer

__all__ = [
    "EPS",
    "FactorPair",
    "BetaNmfConfig",
    "mu_step",
    "mu_step_W",
    "init_factors",
    "initial_factors",
    "jensen_hessian_matrix",
    "kkt_residual",
    "iterate_bounds",
    "beta_nmf_problem",
    "solve_mu",
    "solve_mue",
]

EPS = float(np.finfo(np.float64).eps)


@dataclass
class FactorPair:
    W: np.ndarray
    H: np.ndarray
    W_prev: np.ndarray | None = None
    H_prev: np.ndarray | None = None
    lambda1: float | None = None  # min-vol weight, when relevant

    def __post_init__(self):
        if self.W_prev is None:
            self.W_prev = self.W.copy()
        if self.H_prev is None:
            self.H_prev = self.H.copy()


@dataclass
class BetaNmfConfig:
    beta: float = 1.0
    rank: int = 10
    epsilon: float = EPS
    init: str = "scaled-random"  # 'uniform-random', 'scaled-random' or 'user'
    seed: int = 0
    W0: np.ndarray | None = field(default=None, repr=False)
    H0: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.beta = check_beta(self.beta)
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.init not in ("uniform-random", "scaled-random", "user"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "user" and (self.W0 is None or self.H0 is None):
            raise ValueError("init='user' needs W0 and H0")


def mu_step(X, W, H_from, beta, epsilon=EPS):
    """One multiplicative update of H, anchored at `H_from`.

    `H_from` may be an extrapolated point. The result is >= epsilon.
    """
    if np.any(W < epsilon) or np.any(H_from < epsilon):
        raise ValueError("mu_step needs W >= epsilon and H_from >= epsilon")
    V = W @ H_from
    if beta == 1.0:
        num = W.T @ (X / V)
        den = W.sum(axis=0)[:, None]
    elif beta == 2.0:
        num = W.T @ X
        den = W.T @ V
    else:
        P = V ** (beta - 2.0)
        num = W.T @ (X * P)
        den = W.T @ (V * P)
    return np.maximum(epsilon, H_from * num / den)


def mu_step_W(X, W_from, H, beta, epsilon=EPS):
    """W update by transposition: ``MU(X^T, H^T, W_from^T)^T``."""
    return mu_step(X.T, H.T, W_from.T, beta, epsilon).T


def init_factors(X, rank, epsilon=EPS, seed=0, init="scaled-random"):
    """Random initial factors, uniform on (0, 1) and floored at epsilon.

    'scaled-random' multiplies H by ``<X, WH> / <WH, WH>``.
    """
    rng = np.random.default_rng(seed)
    m, n = X.shape
    W = np.maximum(epsilon, rng.random((m, rank)))
    H = np.maximum(epsilon, rng.random((rank, n)))
    if init == "scaled-random":
        V = W @ H
        rho = float(np.vdot(X, V) / np.vdot(V, V))
        H = np.maximum(epsilon, max(rho, epsilon) * H)
    return W, H


def jensen_hessian_matrix(X, W, H, H_hat, beta):
    """Diagonal Hessian of the column-wise Jensen surrogate of H, at H (anchor H_hat).

    Entry (k, j) is ``(1/H^_kj) [(b-1) s^(b-2) (W^T V^(b-1))_kj
    + (2-b) s^(b-3) (W^T (X V^(b-2)))_kj]`` with ``V = W H_hat`` and
    ``s = H / H_hat``.
    """
    V = W @ H_hat
    s = H / H_hat
    P = V ** (beta - 2.0)
    out = (2.0 - beta) * s ** (beta - 3.0) * (W.T @ (X * P))
    if beta != 1.0:
        out += (beta - 1.0) * s ** (beta - 2.0) * (W.T @ (V * P))
    return out / H_hat


def kkt_residual(X, W, H, beta, epsilon=EPS, active_rtol=1e-6):
    """Largest violation of the KKT conditions of beta-NMF with floor epsilon.

    Entries at the floor (``<= epsilon * (1 + active_rtol)``) contribute the
    negative part of their gradient, all others the gradient's magnitude.
    """
    beta = check_beta(beta)
    V = W @ H
    R = V ** (beta - 1.0) - X * V ** (beta - 2.0)
    out = 0.0
    for F, G in ((W, R @ H.T), (H, W.T @ R)):
        at_floor = F <= epsilon * (1.0 + active_rtol)
        viol = np.where(at_floor, np.maximum(0.0, -G), np.abs(G))
        out = max(out, float(viol.max()))
    return out


def iterate_bounds(X, epsilon=EPS):
    """Entrywise upper bounds on MU/MUe iterates: column / row sums of X over epsilon.

    Returns ``(W_bound, H_bound)`` with shapes (m, 1) and (1, n).
    """
    X = np.asarray(X, dtype=np.float64)
    W_bound = np.maximum(epsilon, X.sum(axis=1, keepdims=True) / epsilon)
    H_bound = np.maximum(epsilon, X.sum(axis=0, keepdims=True) / epsilon)
    return W_bound, H_bound


def _transposed(spec):
    return MajorizerSpec(
        kind=spec.kind,
        evaluate=lambda W, Wt: spec.evaluate(W.T, Wt.T),
        gradient_at_first=lambda W, Wt: spec.gradient_at_first(W.T, Wt.T).T,
        minimize=lambda Wt: spec.minimize(Wt.T).T,
        objective=lambda W: spec.objective(W.T),
        params=spec.params,
    )


def beta_nmf_problem(X, beta, epsilon=EPS, with_curvature=False):
    """BlockProblem for ``min D_beta(X, W H)`` over ``W, H >= epsilon``; blocks [W, H]."""
    beta = check_beta(beta)
    X = np.asarray(X, dtype=np.float64)
    baseline = _baseline_divergence(X, beta)

    def objective(x):
        return _divergence_sum(X, x[0] @ x[1], beta)

    def block_majorizer(i, x, x_hat):
        if i == 0:
            return _transposed(jensen_matrix_majorizer(X.T, x[1].T, beta, epsilon))
        return jensen_matrix_majorizer(X, x[0], beta, epsilon)

    def curvature(i, x, x_hat):
        if i == 0:
            hess = jensen_hessian_matrix(X.T, x[1].T, x[0].T, x_hat.T, beta)
        else:
            hess = jensen_hessian_matrix(X, x[0], x[1], x_hat, beta)
        return 0.5 * float(hess.max())

    return core.BlockProblem(
        n_blocks=2,
        objective=objective,
        block_majorizer=block_majorizer,
        floors=(epsilon, epsilon),
        rel_objective=lambda x: objective(x) / baseline,
        residual=lambda x: kkt_residual(X, x[0], x[1], beta, epsilon),
        curvature=curvature if with_curvature else None,
    )


def initial_factors(X, config):
    """Starting (W, H) for `config`: user-supplied (floored) or random."""
    if config.init == "user":
        W = np.maximum(config.epsilon, np.array(config.W0, dtype=np.float64))
        H = np.maximum(config.epsilon, np.array(config.H0, dtype=np.float64))
        if W.shape != (X.shape[0], config.rank) or H.shape != (config.rank, X.shape[1]):
            raise ValueError("W0/H0 shapes do not match X and rank")
        return W, H
    return init_factors(X, config.rank, config.epsilon, config.seed, config.init)


def solve_mue(X, config, run=None, extrapolation=None, *, with_curvature=False, return_result=False):
    """MUe: multiplicative updates with extrapolation.

    `extrapolation` is an ExtrapolationState template shared by both blocks
    (each block gets its own copy); default Nesterov with the safeguard.

    Returns ``(FactorPair, ConvergenceTrace)``, plus the full
    :class:`bmme.core.RunResult` when `return_result` is set.
    """
    X = np.asarray(X, dtype=np.float64)
    run = core.RunConfig() if run is None else run
    if extrapolation is not None:
        run = core.RunConfig(**{**run.__dict__, "schedules": extrapolation})
    W0, H0 = initial_factors(X, config)
    problem = beta_nmf_problem(X, config.beta, config.epsilon, with_curvature)
    result = core.run(problem, [W0, H0], None, run)
    pair = FactorPair(result.x[0], result.x[1], result.x_prev[0], result.x_prev[1])
    if return_result:
        return pair, result.trace, result
    return pair, result.trace


def solve_mu(X, config, run=None, **kwargs):
    """Plain MU: :func:`solve_mue` with extrapolation switched off."""
    return solve_mue(X, config, run, ExtrapolationState("none"), **kwargs)


def objective(X, pair, beta):
    return D_beta(X, pair.W, pair.H, beta)
