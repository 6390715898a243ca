"""Minimum-volume KL-NMF with and without extrapolation.

Solves

    min  D_KL(X, W H) + lambda1 * logdet(W^T W + delta I)
    s.t. W >= eps, H >= eps, every column of W sums to one.

H is updated by the KL multiplicative update. W minimizes the sum of the
row-wise Jensen surrogate of the KL term and the quadratic surrogate of the
log-det term under the simplex constraints. That problem splits into scalar
problems ``min_{w >= eps} -b1 log w + b2(mu_k) w + (lambda1 L / 2) w**2``
tied together by one multiplier ``mu_k`` per column, which is found by
bisection on the column-sum equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .beta_nmf import EPS, FactorPair, mu_step
from .divergence import _baseline_divergence, _divergence_sum, logdet_volume
from .extrapolation import ExtrapolationState
from .majorizer import MajorizerSpec, logdet_params

__all__ = [
    "BisectionFailure",
    "MinVolConfig",
    "WUpdateWorkspace",
    "w_workspace",
    "psi",
    "psi_matrix",
    "column_sum_residual",
    "mu_brackets",
    "solve_mu_k",
    "solve_multipliers",
    "minvol_h_step",
    "minvol_w_step",
    "minvol_objective",
    "minvol_w_majorizer_value",
    "resolve_lambda1",
    "init_minvol",
    "minvol_problem",
    "solve_minvol",
    "coordinate_residual",
]


class BisectionFailure(RuntimeError):
    """No sign change of the column-sum equation could be bracketed."""


@dataclass
class MinVolConfig:
    rank: int = 4
    lambda_tilde: float = 0.1
    lambda1: float | None = None  # overrides lambda_tilde when given
    delta: float = 0.1
    epsilon: float = EPS
    seed: int = 0
    bisection_tol: float = 1e-10
    bisection_max_iter: int = 200
    loose_bracket: bool = False
    W0: np.ndarray | None = field(default=None, repr=False)
    H0: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.lambda_tilde < 0 or (self.lambda1 is not None and self.lambda1 < 0):
            raise ValueError("regularization weights must be nonnegative")
        if not self.bisection_tol > 0 or self.bisection_max_iter < 1:
            raise ValueError("invalid bisection settings")


@dataclass
class WUpdateWorkspace:
    """Quantities of the W subproblem that do not depend on the multipliers.

    The scalar problem for entry (j, k) is
    ``min_w -B1_jk log w + (B2_base_jk + lambda1 mu_k) w + (quad / 2) w**2``
    with ``quad = lambda1 * L``.
    """

    L: float
    A: np.ndarray
    B1: np.ndarray
    B2_base: np.ndarray
    lambda1: float
    W_hat: np.ndarray
    H_rowsum: np.ndarray
    mu: np.ndarray | None = None

    @property
    def quad(self):
        return self.lambda1 * self.L


def w_workspace(X, W_hat, H, lambda1, delta):
    if not lambda1 > 0:
        raise ValueError("the min-vol W update needs lambda1 > 0; use beta-NMF with beta=1 otherwise")
    p = logdet_params(W_hat, delta, lambda1)
    B1 = ((X / (W_hat @ H)) @ H.T) * W_hat
    H_rowsum = H.sum(axis=1)
    B2_base = H_rowsum[None, :] + lambda1 * (p.A - p.L_phi1 * W_hat)
    return WUpdateWorkspace(p.L_phi1, p.A, B1, B2_base, float(lambda1), W_hat, H_rowsum)


def _positive_root(b1, b2, a):
    """Positive root of ``a w**2 + b2 w - b1 = 0`` (a > 0, b1 >= 0), cancellation-free."""
    disc = np.sqrt(b2 * b2 + 4.0 * a * b1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(b2 >= 0, 2.0 * b1 / (b2 + disc), (disc - b2) / (2.0 * a))
    # b1 = b2 = 0 gives 0/0 above; the root is 0
    return np.where((b2 >= 0) & (b2 + disc == 0), 0.0, pos)


def psi(j, k, mu_k, ws, lambda1=None):
    """Unconstrained minimizer of the (j, k) scalar problem at multiplier mu_k."""
    lam = ws.lambda1 if lambda1 is None else lambda1
    b2 = ws.B2_base[j, k] + lam * mu_k
    return float(_positive_root(ws.B1[j, k], b2, lam * ws.L))


def psi_matrix(mu, ws):
    """psi for every entry, with mu a length-r vector."""
    b2 = ws.B2_base + ws.lambda1 * np.asarray(mu)[None, :]
    return _positive_root(ws.B1, b2, ws.quad)


def column_sum_residual(mu, ws, epsilon, cols=slice(None)):
    """``sum_j max(eps, psi_jk(mu_k)) - 1`` for the selected columns."""
    b2 = ws.B2_base[:, cols] + ws.lambda1 * np.asarray(mu)[None, :]
    W = np.maximum(epsilon, _positive_root(ws.B1[:, cols], b2, ws.quad))
    return W.sum(axis=0) - 1.0


def mu_brackets(ws, loose_bracket=False):
    """Per-column interval for the multiplier.

    mu_tilde_jk is where entry (j, k) equals 1/m, so the column-sum root lies
    between the row-wise min and max. `loose_bracket` uses the guess
    ``(4 lambda1 L b1 m - 1/m - sum_i H_ki) / lambda1 + L W^ - A`` instead,
    which need not contain the root and leans on the expansion in
    :func:`solve_multipliers`.
    """
    m = ws.B1.shape[0]
    lam, L = ws.lambda1, ws.L
    if loose_bracket:
        mt = (4.0 * lam * L * ws.B1 * m - 1.0 / m - ws.H_rowsum[None, :]) / lam + L * ws.W_hat - ws.A
    else:
        # a w^2 + b2 w - b1 = 0 at w = 1/m  <=>  b2 = b1 m - a / m
        mt = (ws.B1 * m - lam * L / m - ws.B2_base) / lam
    return mt.min(axis=0), mt.max(axis=0)


def solve_multipliers(ws, epsilon=EPS, tol=1e-10, max_iter=200, loose_bracket=False):
    """Multipliers mu (one per column) making every column of W sum to one.

    Vectorized bisection over the r columns. The initial bracket comes from
    :func:`mu_brackets`; when the residual does not change sign on it, the
    half-width is doubled up to 60 times.
    """
    m, r = ws.B1.shape
    if not epsilon < 1.0 / m:
        raise ValueError("epsilon must be smaller than 1/m for the simplex to be reachable")
    lo, hi = mu_brackets(ws, loose_bracket)
    lo = lo.astype(np.float64).copy()
    hi = hi.astype(np.float64).copy()
    # residual is nonincreasing in mu: need F(lo) >= 0 >= F(hi)
    for _ in range(61):
        f_lo = column_sum_residual(lo, ws, epsilon)
        f_hi = column_sum_residual(hi, ws, epsilon)
        bad = (f_lo < 0) | (f_hi > 0)
        if not bad.any():
            break
        center = 0.5 * (lo + hi)
        half = np.maximum(0.5 * (hi - lo), 1.0 + np.abs(center))
        # widen only the offending side(s) by doubling the half-width
        lo = np.where(bad & (f_lo < 0), center - 2.0 * half, lo)
        hi = np.where(bad & (f_hi > 0), center + 2.0 * half, hi)
    else:
        raise BisectionFailure("could not bracket the column-sum equation; check lambda1 and epsilon")

    mu = 0.5 * (lo + hi)
    f_mid = column_sum_residual(mu, ws, epsilon)
    done = np.abs(f_mid) <= tol
    for _ in range(max_iter):
        if done.all():
            break
        go_right = f_mid > 0
        lo = np.where(~done & go_right, mu, lo)
        hi = np.where(~done & ~go_right, mu, hi)
        new_mu = 0.5 * (lo + hi)
        stalled = new_mu == mu
        mu = np.where(done, mu, new_mu)
        f_mid = column_sum_residual(mu, ws, epsilon)
        done = done | (np.abs(f_mid) <= tol) | stalled
    ws.mu = mu
    return mu


def solve_mu_k(k, ws, lambda1=None, epsilon=EPS, tol=1e-10, max_iter=200, loose_bracket=False):
    """Multiplier of column k alone (see :func:`solve_multipliers`)."""
    if lambda1 is not None and lambda1 != ws.lambda1:
        raise ValueError("lambda1 differs from the workspace's")
    sub = WUpdateWorkspace(
        ws.L, ws.A[:, [k]], ws.B1[:, [k]], ws.B2_base[:, [k]], ws.lambda1, ws.W_hat[:, [k]], ws.H_rowsum[[k]]
    )
    return float(solve_multipliers(sub, epsilon, tol, max_iter, loose_bracket)[0])


def minvol_h_step(X, W, H_from, epsilon=EPS):
    """KL multiplicative update of H (the min-vol term does not involve H)."""
    return mu_step(X, W, H_from, 1.0, epsilon)


def minvol_w_step(X, W_from, H, config=None, *, lambda1=None, delta=None, return_workspace=False):
    """Minimize the W surrogate anchored at `W_from` over the floored simplex.

    `config` supplies delta, epsilon and bisection settings; `lambda1` must be
    the resolved regularization weight (taken from ``config.lambda1`` if not
    passed).
    """
    config = MinVolConfig() if config is None else config
    lam = config.lambda1 if lambda1 is None else lambda1
    if lam is None:
        raise ValueError("lambda1 is unresolved; pass it explicitly or set config.lambda1")
    dlt = config.delta if delta is None else delta
    if np.any(W_from < config.epsilon) or np.any(H < config.epsilon):
        raise ValueError("minvol_w_step needs W_from >= epsilon and H >= epsilon")
    ws = w_workspace(X, W_from, H, lam, dlt)
    mu = solve_multipliers(ws, config.epsilon, config.bisection_tol, config.bisection_max_iter, config.loose_bracket)
    W = np.maximum(config.epsilon, psi_matrix(mu, ws))
    if return_workspace:
        return W, ws
    return W


def minvol_objective(X, W, H, lambda1, delta):
    return _divergence_sum(X, W @ H, 1.0) + lambda1 * logdet_volume(W, delta)


def minvol_w_majorizer_value(X, W, W_hat, H, lambda1, delta):
    """Value of the W surrogate (Jensen for KL + quadratic for log-det) at W."""
    p = logdet_params(W_hat, delta, lambda1)
    V_hat = W_hat @ H
    # row i of the Jensen surrogate: sum_jk (H_kj W^_ik / V^_ij) d(X_ij, V^_ij W_ik / W^_ik)
    ratio = W / W_hat
    Xr = X / V_hat
    # expand d(x, y) = x log x - x log y - x + y and sum the weights analytically
    weights_sum_log = (Xr @ H.T) * W_hat  # sum_j X_ij H_kj W^_ik / V^_ij
    pos = X > 0
    xlogx = np.zeros_like(X)
    xlogx[pos] = X[pos] * np.log(X[pos] / V_hat[pos])
    kl_part = (
        xlogx.sum()
        - np.sum(weights_sum_log * np.log(ratio))
        - X.sum()
        + np.sum(W * H.sum(axis=1)[None, :])
    )
    D = W - W_hat
    logdet_part = logdet_volume(W_hat, delta) + np.vdot(p.A, D) + 0.5 * p.L_phi1 * np.vdot(D, D)
    return float(kl_part + lambda1 * logdet_part)


def resolve_lambda1(X, W0, H0, lambda_tilde, delta):
    """``lambda_tilde * D_KL(X, W0 H0) / |logdet(W0^T W0 + delta I)|``."""
    ld = logdet_volume(W0, delta)
    if ld == 0.0:
        raise ValueError("logdet(W0^T W0 + delta I) is zero; set lambda1 directly")
    return lambda_tilde * _divergence_sum(X, W0 @ H0, 1.0) / abs(ld)


def init_minvol(X, rank, epsilon=EPS, seed=0):
    """Random start with simplex columns in W and H scaled so sum(WH) = sum(X)."""
    rng = np.random.default_rng(seed)
    m, n = X.shape
    W = rng.random((m, rank)) + epsilon
    W /= W.sum(axis=0, keepdims=True)
    W = np.maximum(epsilon, W)
    H = np.maximum(epsilon, rng.random((rank, n)))
    rho = X.sum() / (W @ H).sum()
    H = np.maximum(epsilon, rho * H)
    return W, H


def minvol_problem(X, lambda1, config):
    """BlockProblem with blocks [W, H] for min-vol KL-NMF."""
    X = np.asarray(X, dtype=np.float64)
    delta, eps = config.delta, config.epsilon
    baseline = _baseline_divergence(X, 1.0)

    def objective(x):
        return minvol_objective(X, x[0], x[1], lambda1, delta)

    def block_majorizer(i, x, x_hat):
        if i == 0:
            H = x[1]
            return MajorizerSpec(
                kind="minvol-w",
                evaluate=lambda W, Wt: minvol_w_majorizer_value(X, W, Wt, H, lambda1, delta),
                gradient_at_first=_not_needed,
                minimize=lambda Wt: minvol_w_step(X, Wt, H, config, lambda1=lambda1),
                objective=lambda W: minvol_objective(X, W, H, lambda1, delta),
            )
        W = x[0]
        return MajorizerSpec(
            kind="jensen-beta",
            evaluate=_not_needed,
            gradient_at_first=_not_needed,
            minimize=lambda Ht: minvol_h_step(X, W, Ht, eps),
        )

    return core.BlockProblem(
        n_blocks=2,
        objective=objective,
        block_majorizer=block_majorizer,
        floors=(eps, eps),
        rel_objective=lambda x: objective(x) / baseline,
        residual=lambda x: coordinate_residual(X, x[0], x[1], lambda1, config),
    )


def _not_needed(*args):
    raise NotImplementedError("not used by the solver")


def solve_minvol(X, config, run=None, extrapolation=None, *, return_result=False):
    """Min-vol KL-NMF by block MM with extrapolation (default Nesterov).

    Pass ``ExtrapolationState('none')`` for the plain MM variant. The trace's
    ``rel_objective`` is the objective divided by ``D_KL(X, (Xe/n) e^T)``.
    Returns ``(FactorPair, ConvergenceTrace)`` and the resolved lambda1 is
    available as ``pair.lambda1``.
    """
    X = np.asarray(X, dtype=np.float64)
    if config.W0 is not None and config.H0 is not None:
        W0 = np.maximum(config.epsilon, np.array(config.W0, dtype=np.float64))
        H0 = np.maximum(config.epsilon, np.array(config.H0, dtype=np.float64))
    else:
        W0, H0 = init_minvol(X, config.rank, config.epsilon, config.seed)
    lambda1 = config.lambda1
    if lambda1 is None:
        lambda1 = resolve_lambda1(X, W0, H0, config.lambda_tilde, config.delta)
    run = core.RunConfig() if run is None else run
    if extrapolation is not None:
        run = core.RunConfig(**{**run.__dict__, "schedules": extrapolation})
    problem = minvol_problem(X, lambda1, config)
    result = core.run(problem, [W0, H0], None, run)
    pair = FactorPair(result.x[0], result.x[1], result.x_prev[0], result.x_prev[1], lambda1)
    if return_result:
        return pair, result.trace, result
    return pair, result.trace


def coordinate_residual(X, W, H, lambda1, config):
    """How much one more exact block step would lower the relative objective.

    Re-minimizes the W surrogate at W (then the H surrogate at H) and returns
    the larger drop in ``objective / D_KL(X, (Xe/n) e^T)``. Zero at a
    coordinate-wise minimizer.
    """
    baseline = _baseline_divergence(X, 1.0)
    f0 = minvol_objective(X, W, H, lambda1, config.delta)
    W1 = minvol_w_step(X, W, H, config, lambda1=lambda1)
    H1 = minvol_h_step(X, W, H, config.epsilon)
    drops = (
        f0 - minvol_objective(X, W1, H, lambda1, config.delta),
        f0 - minvol_objective(X, W, H1, lambda1, config.delta),
    )
    return max(0.0, max(drops)) / baseline
