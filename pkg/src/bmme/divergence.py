"""Beta-divergences for beta in [1, 2], their gradients and normalized errors."""

from __future__ import annotations

import numpy as np

__all__ = [
    "DegenerateBaselineError",
    "check_beta",
    "d_beta",
    "d_beta_prime",
    "d_beta_second",
    "D_beta",
    "grad_H",
    "grad_W",
    "logdet_volume",
    "mean_baseline",
    "rel_error_minvol",
    "rel_objective_beta",
]


class DegenerateBaselineError(ValueError):
    """The rank-one row-mean fit reproduces X exactly, so it cannot normalize."""


def check_beta(beta):
    beta = float(beta)
    if not 1.0 <= beta <= 2.0:
        raise ValueError(f"beta must lie in [1, 2], got {beta}")
    return beta


def _xlogx_over_y(x, y):
    # x log(x/y) with the 0 log 0 = 0 convention
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pos = x > 0
    out = np.zeros(np.broadcast(x, y).shape)
    xb, yb = np.broadcast_arrays(x, y)
    out[pos] = xb[pos] * np.log(xb[pos] / yb[pos])
    return out


def _d_elementwise(x, y, beta):
    # For beta > 1 with s = beta - 1:
    #   d = y**s * (x * expm1(s log(x/y)) / s + y - x) / beta,
    # which stays accurate as beta -> 1 where the textbook form cancels.
    if beta == 1.0:
        return _xlogx_over_y(x, y) - x + y
    s = beta - 1.0
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    pos = x > 0
    ratio = np.log(np.where(pos, x, 1.0) / y)
    lead = np.where(pos, x * np.expm1(s * ratio) / s, 0.0)
    return y**s * (lead + y - x) / beta


def d_beta(x, y, beta):
    """Elementwise beta-divergence d_beta(x | y).

    For beta = 1 this is the Kullback-Leibler divergence
    ``x log(x/y) - x + y`` (with ``d(0, y) = y``); for 1 < beta <= 2 it is
    ``(x**b + (b-1) y**b - b x y**(b-1)) / (b (b-1))``. Scalars in, scalar out.
    """
    beta = check_beta(beta)
    x_arr = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if np.any(x_arr < 0):
        raise ValueError("d_beta requires x >= 0")
    if np.any(y_arr <= 0):
        raise ValueError("d_beta requires y > 0")
    out = _d_elementwise(x_arr, y_arr, beta)
    if out.ndim == 0:
        return float(out)
    return out


def d_beta_prime(x, y, beta):
    """Derivative of d_beta(x | y) in y: ``y**(b-1) - x y**(b-2)``."""
    y = np.asarray(y, dtype=np.float64)
    return y ** (beta - 1.0) - x * y ** (beta - 2.0)


def d_beta_second(x, y, beta):
    """Second derivative in y: ``(b-1) y**(b-2) + (2-b) x y**(b-3)``."""
    y = np.asarray(y, dtype=np.float64)
    return (beta - 1.0) * y ** (beta - 2.0) + (2.0 - beta) * x * y ** (beta - 3.0)


def _product(X, W, H):
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if W.ndim != 2 or H.ndim != 2 or W.shape[1] != H.shape[0]:
        raise ValueError(f"factor shapes {W.shape} and {H.shape} do not conform")
    if X.shape != (W.shape[0], H.shape[1]):
        raise ValueError(f"X has shape {X.shape}, W H has shape {(W.shape[0], H.shape[1])}")
    V = W @ H
    if np.any(V <= 0):
        raise ValueError("W H must be entrywise positive")
    return X, V


def _divergence_sum(X, V, beta):
    if beta == 1.0:
        return float(np.sum(_xlogx_over_y(X, V)) - X.sum() + V.sum())
    return float(np.sum(_d_elementwise(X, V, beta)))


def D_beta(X, W, H, beta):
    """Sum of d_beta(X_ij | (W H)_ij) over all entries."""
    beta = check_beta(beta)
    X, V = _product(X, W, H)
    return _divergence_sum(X, V, beta)


def _residual_factor(X, V, beta):
    # (WH)^(b-1) - X * (WH)^(b-2); one power call
    Vb2 = V ** (beta - 2.0)
    return V * Vb2 - X * Vb2


def grad_H(X, W, H, beta):
    """Gradient of D_beta(X, W H) with respect to H."""
    beta = check_beta(beta)
    X, V = _product(X, W, H)
    return np.asarray(W).T @ _residual_factor(X, V, beta)


def grad_W(X, W, H, beta):
    """Gradient of D_beta(X, W H) with respect to W."""
    beta = check_beta(beta)
    X, V = _product(X, W, H)
    return _residual_factor(X, V, beta) @ np.asarray(H).T


def mean_baseline(X):
    """Rank-one fit ``(X e / n) e^T`` repeating each row mean."""
    X = np.asarray(X, dtype=np.float64)
    return np.repeat(X.mean(axis=1, keepdims=True), X.shape[1], axis=1)


def _baseline_divergence(X, beta):
    X = np.asarray(X, dtype=np.float64)
    Y = mean_baseline(X)
    # rows of zeros give Y = 0 there and contribute nothing
    keep = Y[:, 0] > 0
    if not np.any(keep):
        raise DegenerateBaselineError("X is the zero matrix")
    den = _divergence_sum(X[keep], Y[keep], beta)
    if not den > 0:
        raise DegenerateBaselineError("X is fitted exactly by its row means")
    return den


def logdet_volume(W, delta):
    """``log det(W^T W + delta I)``."""
    W = np.asarray(W, dtype=np.float64)
    sign, logdet = np.linalg.slogdet(W.T @ W + delta * np.eye(W.shape[1]))
    if sign <= 0:
        raise ValueError("W^T W + delta I is not positive definite")
    return float(logdet)


def rel_error_minvol(X, W, H, lambda1, delta):
    """Relative min-vol KL objective.

    ``(D_KL(X, WH) + lambda1 * logdet(W^T W + delta I)) / D_KL(X, (Xe/n) e^T)``
    """
    if lambda1 < 0:
        raise ValueError("lambda1 must be nonnegative")
    if not delta > 0:
        raise ValueError("delta must be positive")
    num = D_beta(X, W, H, 1.0)
    if lambda1:
        num += lambda1 * logdet_volume(W, delta)
    return num / _baseline_divergence(X, 1.0)


def rel_objective_beta(X, W, H, beta):
    """``D_beta(X, WH) / D_beta(X, (Xe/n) e^T)``."""
    beta = check_beta(beta)
    return D_beta(X, W, H, beta) / _baseline_divergence(X, beta)
