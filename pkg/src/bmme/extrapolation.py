"""Extrapolation schedules and the summability safeguard on their weights.

Each block of a BMMe run owns an :class:`ExtrapolationState`. Advancing it
yields the weight ``alpha`` used to form ``x_hat = x + alpha * P(x - x_prev)``.
The safeguarded weight is capped so that
``alpha**2 * ||P(x - x_prev)||**2 <= c**2 / t**q``, which keeps the series of
extrapolation terms summable for any ``q > 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "SCHEDULES",
    "ExtrapolationState",
    "next_alpha_raw",
    "safeguarded_alpha",
    "safeguard_cap",
    "project_nonneg_diff",
    "project_identity_diff",
]

SCHEDULES = ("nesterov", "classical", "none")


@dataclass(frozen=True)
class ExtrapolationState:
    schedule: str = "nesterov"
    c: float = 1e8
    q: float = 1.5
    eta_prev: float = 1.0
    t: int = 0

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}, expected one of {SCHEDULES}")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not self.q > 1:
            raise ValueError("q must be greater than 1")
        if self.eta_prev < 1:
            raise ValueError("eta_prev must be >= 1")
        if self.t < 0:
            raise ValueError("t must be >= 0")

    def reset(self):
        """Same schedule and constants, counter back at zero."""
        return replace(self, eta_prev=1.0, t=0)


def next_alpha_raw(state):
    """Advance the counter and return ``(alpha, new_state)`` without safeguard.

    nesterov: ``eta_t = (1 + sqrt(1 + 4 eta_{t-1}**2)) / 2`` and
    ``alpha = (eta_{t-1} - 1) / eta_t``; classical: ``(t - 1) / t``.
    """
    t = state.t + 1
    if state.schedule == "nesterov":
        eta = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.eta_prev**2))
        alpha = (state.eta_prev - 1.0) / eta
        return alpha, replace(state, eta_prev=eta, t=t)
    if state.schedule == "classical":
        return (t - 1) / t, replace(state, t=t)
    return 0.0, replace(state, t=t)


def safeguard_cap(state, t=None):
    """Per-term bound ``c**2 / t**q`` on ``alpha**2 * ||P(delta)||**2``."""
    t = state.t if t is None else t
    return state.c**2 / float(t) ** state.q


def safeguarded_alpha(state, delta_norm):
    """Nesterov/classical weight capped by ``c / (t**(q/2) * delta_norm)``."""
    if delta_norm < 0:
        raise ValueError("delta_norm must be nonnegative")
    alpha, new_state = next_alpha_raw(state)
    if alpha == 0.0 or delta_norm == 0.0:
        return alpha, new_state
    bound = new_state.c / (new_state.t ** (0.5 * new_state.q) * delta_norm)
    return min(alpha, bound), new_state


def project_nonneg_diff(curr, prev):
    """``[curr - prev]_+``, the projection used for nonnegative factors."""
    curr = np.asarray(curr, dtype=np.float64)
    prev = np.asarray(prev, dtype=np.float64)
    if curr.shape != prev.shape:
        raise ValueError(f"shape mismatch {curr.shape} vs {prev.shape}")
    return np.maximum(curr - prev, 0.0)


def project_identity_diff(curr, prev):
    """Plain difference; valid when the block's domain is the whole space."""
    curr = np.asarray(curr, dtype=np.float64)
    prev = np.asarray(prev, dtype=np.float64)
    if curr.shape != prev.shape:
        raise ValueError(f"shape mismatch {curr.shape} vs {prev.shape}")
    return curr - prev
