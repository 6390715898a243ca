"""Block majorization-minimization with extrapolation (the generic engine).

At iteration t every block i, in a fixed order, is

1. extrapolated: ``x_hat = x_i + alpha_i * P_i(x_i - x_i_prev)``, with
   ``alpha_i`` from the block's safeguarded schedule;
2. replaced by the minimizer of a majorizer of the block objective anchored
   at ``x_hat``, where blocks ``j < i`` already hold their new values.

With every schedule set to ``'none'`` this is plain block MM and the
objective never increases.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .extrapolation import ExtrapolationState, project_nonneg_diff, safeguard_cap, safeguarded_alpha
from .matrixio import ConvergenceTrace, TraceRecord

__all__ = [
    "BlockProblem",
    "RunConfig",
    "ConditionMonitor",
    "RunResult",
    "InfeasibleStartError",
    "Step",
    "BlockIterator",
    "iterate",
    "run",
    "check_accumulated_bound",
]


class InfeasibleStartError(ValueError):
    pass


@dataclass
class BlockProblem:
    """A multi-block problem together with its per-block majorizers.

    block_majorizer(i, x, x_hat) gets the block index, the current list of
    blocks (blocks before i already updated) and the extrapolated block, and
    returns a MajorizerSpec whose ``minimize(x_hat)`` is the new block.

    projections[i](curr, prev) must return a new array; the engine reuses it.

    curvature(i, x, x_hat), when given, returns an upper estimate of half the
    surrogate's Hessian norm between ``x[i]`` and ``x_hat``; it feeds the
    constant of :func:`check_accumulated_bound`.
    """

    n_blocks: int
    objective: Callable[[Sequence[np.ndarray]], float]
    block_majorizer: Callable
    floors: Sequence[float | None] | None = None
    projections: Sequence[Callable] | None = None
    rel_objective: Callable[[Sequence[np.ndarray]], float] | None = None
    residual: Callable[[Sequence[np.ndarray]], float] | None = None
    curvature: Callable | None = None

    def floor(self, i):
        return None if self.floors is None else self.floors[i]

    def projection(self, i):
        return project_nonneg_diff if self.projections is None else self.projections[i]


@dataclass
class RunConfig:
    max_iter: int = 200
    max_seconds: float = math.inf
    schedules: Sequence[ExtrapolationState] | ExtrapolationState = field(
        default_factory=lambda: ExtrapolationState("nesterov")
    )
    trace_every: int | None = 1  # None: skip objective evaluation entirely
    stop_tol: float = 0.0
    stop_window: int = 10
    compute_residual_every: int | None = None
    record_wall_time: bool = True

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if not self.max_seconds > 0:
            raise ValueError("max_seconds must be positive")
        if self.trace_every is not None and self.trace_every < 1:
            raise ValueError("trace_every must be >= 1 or None")

    def states_for(self, n_blocks):
        return _fresh_states(self.schedules, n_blocks)


def _fresh_states(schedules, n_blocks):
    if isinstance(schedules, ExtrapolationState):
        return [schedules.reset() for _ in range(n_blocks)]
    if len(schedules) != n_blocks:
        raise ValueError("one ExtrapolationState per block is required")
    return [s.reset() for s in schedules]


@dataclass
class ConditionMonitor:
    """Running record of the extrapolation terms ``alpha**2 ||P(delta)||**2``."""

    n_blocks: int
    terms: list[list[float]] = field(default_factory=list)
    caps: list[list[float]] = field(default_factory=list)
    curvatures: list[list[float]] = field(default_factory=list)
    objectives: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.terms:
            self.terms = [[] for _ in range(self.n_blocks)]
            self.caps = [[] for _ in range(self.n_blocks)]
            self.curvatures = [[] for _ in range(self.n_blocks)]

    def record(self, block, alpha, delta_norm, cap, curvature=None):
        self.terms[block].append(alpha * alpha * delta_norm * delta_norm)
        self.caps[block].append(cap)
        if curvature is not None:
            self.curvatures[block].append(curvature)

    @property
    def partial_sums(self):
        return [math.fsum(t) for t in self.terms]

    @property
    def partial_sum_c3(self):
        return math.fsum(self.partial_sums)

    def cap_violations(self, rel_slack=1e-12):
        """(block, index) pairs whose term exceeds its cap."""
        out = []
        for i in range(self.n_blocks):
            for k, (term, cap) in enumerate(zip(self.terms[i], self.caps[i])):
                if term > cap * (1.0 + rel_slack):
                    out.append((i, k))
        return out

    def estimated_constant(self):
        vals = [c for block in self.curvatures for c in block]
        return max(vals) if vals else None


@dataclass
class RunResult:
    x: list[np.ndarray]
    x_prev: list[np.ndarray]
    trace: ConvergenceTrace
    monitor: ConditionMonitor
    iterations: int
    step_norms: list[float]

    def __iter__(self):
        # allows ``x, trace, monitor = run(...)``
        return iter((self.x, self.trace, self.monitor))


def _check_feasible(problem, blocks, what):
    for i, b in enumerate(blocks):
        lo = problem.floor(i)
        if lo is not None and np.any(np.asarray(b) < lo):
            raise InfeasibleStartError(f"{what} block {i} violates its floor {lo}")


@dataclass
class Step:
    """One finished BMMe iteration as yielded by :func:`iterate`."""

    iteration: int
    seconds: float  # time spent in the block updates of this iteration
    alphas: list[float]
    step_norm: float


class BlockIterator:
    """Stepwise BMMe: ``next(it)`` performs one iteration and returns a :class:`Step`.

    ``it.x`` and ``it.x_prev`` hold the current and previous blocks and
    ``it.monitor`` the extrapolation terms so far. Useful for running two
    solvers in lockstep.
    """

    def __init__(self, problem, x0, x_prev0=None, schedules=None):
        s = problem.n_blocks
        self.problem = problem
        self.x = [np.array(b, dtype=np.float64) for b in x0]
        self.x_prev = (
            [b.copy() for b in self.x] if x_prev0 is None else [np.array(b, dtype=np.float64) for b in x_prev0]
        )
        if len(self.x) != s or len(self.x_prev) != s:
            raise ValueError(f"expected {s} blocks")
        _check_feasible(problem, self.x, "x0")
        _check_feasible(problem, self.x_prev, "x_prev0")
        self.states = _fresh_states(ExtrapolationState("nesterov") if schedules is None else schedules, s)
        self.monitor = ConditionMonitor(s)
        self.iteration = 0

    def __iter__(self):
        return self

    def __next__(self):
        problem, x, x_prev = self.problem, self.x, self.x_prev
        s = problem.n_blocks
        tic = time.perf_counter()
        alphas = [0.0] * s
        step_sq = 0.0
        for i in range(s):
            d = problem.projection(i)(x[i], x_prev[i])
            dn = float(np.linalg.norm(d))
            alpha, self.states[i] = safeguarded_alpha(self.states[i], dn)
            alphas[i] = alpha
            if alpha > 0.0:
                x_hat = np.multiply(d, alpha, out=d)  # d is fresh; reuse its buffer
                x_hat += x[i]
            else:
                x_hat = x[i]
            curv = problem.curvature(i, x, x_hat) if problem.curvature is not None else None
            self.monitor.record(i, alpha, dn, safeguard_cap(self.states[i]), curv)
            new = problem.block_majorizer(i, x, x_hat).minimize(x_hat)
            step_sq += float(np.vdot(new - x[i], new - x[i]))
            x_prev[i] = x[i]
            x[i] = new
        seconds = time.perf_counter() - tic
        self.iteration += 1
        return Step(self.iteration, seconds, alphas, math.sqrt(step_sq))


def iterate(problem, x0, x_prev0=None, schedules=None):
    """Unbounded stepwise BMMe; see :class:`BlockIterator`."""
    return BlockIterator(problem, x0, x_prev0, schedules)


def run(problem, x0, x_prev0=None, config=None):
    """Run BMMe from ``x0`` (with previous point ``x_prev0``, default ``x0``).

    Returns a :class:`RunResult`; it unpacks as ``(x, trace, monitor)``.
    Wall time in the trace counts the update loop only, not objective
    evaluations.
    """
    config = RunConfig() if config is None else config
    s = problem.n_blocks
    it = BlockIterator(problem, x0, x_prev0, config.schedules)
    trace = ConvergenceTrace()
    tracing = config.trace_every is not None
    step_norms = []

    def snapshot(k, wall, alphas):
        x = it.x
        obj = problem.objective(x)
        rel = problem.rel_objective(x) if problem.rel_objective is not None else obj
        res = None
        every = config.compute_residual_every
        if every and problem.residual is not None and k % every == 0:
            res = problem.residual(x)
        it.monitor.objectives.append(obj)
        trace.append(
            TraceRecord(
                iter=k,
                wall_seconds=wall if config.record_wall_time else 0.0,
                objective=obj,
                rel_objective=rel,
                alpha_W=alphas[0] if s > 0 else 0.0,
                alpha_H=alphas[1] if s > 1 else 0.0,
                kkt_residual=res,
            )
        )
        return obj

    history = []
    if tracing:
        history.append(snapshot(0, 0.0, [0.0] * s))

    elapsed = 0.0
    while it.iteration < config.max_iter and elapsed < config.max_seconds:
        step = next(it)
        elapsed += step.seconds
        step_norms.append(step.step_norm)
        k = step.iteration
        if tracing and (k % config.trace_every == 0 or k == config.max_iter):
            history.append(snapshot(k, elapsed, step.alphas))
            w = config.stop_window
            if config.stop_tol > 0 and len(history) > w:
                old, new_obj = history[-1 - w], history[-1]
                if abs(old - new_obj) <= config.stop_tol * max(abs(old), 1e-300):
                    break

    return RunResult(it.x, it.x_prev, trace, it.monitor, it.iteration, step_norms)


def check_accumulated_bound(monitor, trace, C_max=None, rel_slack=1e-10):
    """Check ``f(x_T) <= f(x_0) + C_max * sum_t sum_i alpha**2 ||P(delta)||**2``.

    Also requires every extrapolation term to respect its ``c**2 / t**q``
    cap. `C_max` defaults to the largest curvature estimate recorded during
    the run; the true constant of the convergence argument is existential, so
    this is an empirical check. Returns a bool.
    """
    if len(trace) == 0:
        raise ValueError("trace is empty")
    if monitor.cap_violations():
        return False
    total = monitor.partial_sum_c3
    if C_max is None:
        C_max = monitor.estimated_constant()
        if C_max is None:
            if total > 0:
                raise ValueError("C_max is required when no curvature estimates were recorded")
            C_max = 0.0
    f_first = trace[0].objective
    f_last = trace[-1].objective
    return f_last <= f_first + C_max * total + rel_slack * max(1.0, abs(f_first))
