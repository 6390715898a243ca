"""Command-line runner: ``bmme solve``, ``bmme bench`` and ``bmme synth``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .beta_nmf import EPS, BetaNmfConfig, kkt_residual, solve_mue
from .core import RunConfig
from .extrapolation import SCHEDULES, ExtrapolationState
from .matrixio import SyntheticSpec, read_matrix, synth_lowrank, write_matrix, write_trace
from .minvol import MinVolConfig, coordinate_residual, solve_minvol

__all__ = ["main", "build_parser", "solve_once", "bench", "crossing_iterations", "median_curves"]

ALGOS = ("mu", "mue", "minvol", "minvol-e")
COUNTERPART = {"mue": "mu", "minvol-e": "minvol"}
FORMATS = ("mm", "csv", "bin")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_problem_flags(p):
    p.add_argument("--rank", type=_positive_int, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--max-seconds", type=float, default=math.inf)
    p.add_argument("--epsilon", type=float, default=EPS)
    p.add_argument("--lambda-tilde", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--schedule", choices=SCHEDULES, default="nesterov",
                   help="schedule of the extrapolated algorithms (mue, minvol-e)")
    p.add_argument("--c", type=float, default=1e8, help="safeguard constant")
    p.add_argument("--q", type=float, default=1.5, help="safeguard exponent, > 1")
    p.add_argument("--kkt-every", type=int, default=None,
                   help="record the stationarity residual every N iterations")
    p.add_argument("--no-wall-time", action="store_true",
                   help="write 0 for wall_seconds so traces are reproducible byte for byte")


def _add_data_flags(p, required):
    p.add_argument("--data", required=required, help="input matrix")
    p.add_argument("--format", choices=FORMATS, default="csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="bmme", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="factorize one matrix")
    _add_data_flags(p, required=True)
    _add_problem_flags(p)
    p.add_argument("--algo", choices=ALGOS, default="mue")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="write the convergence trace here")
    p.add_argument("--trace-format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("bench", help="compare algorithms over several random starts")
    _add_data_flags(p, required=False)
    _add_problem_flags(p)
    p.add_argument("--algos", default="mu,mue", help="comma-separated subset of " + ",".join(ALGOS))
    p.add_argument("--seeds", type=_positive_int, default=10, help="number of random starts (seeds 0..N-1)")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", help="directory for curves_iter.csv, curves_time.csv and report.json")
    p.add_argument("--time-points", type=_positive_int, default=200)
    p.add_argument("--m", type=_positive_int, default=100, help="rows of the synthetic matrix when --data is absent")
    p.add_argument("--n", type=_positive_int, default=200)
    p.add_argument("--r-true", type=_positive_int, default=10)
    p.add_argument("--noise", choices=("none", "poisson", "gaussian-clipped"), default="poisson")
    p.add_argument("--data-seed", type=int, default=0)

    p = sub.add_parser("synth", help="write a synthetic low-rank matrix")
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--r-true", type=_positive_int, required=True)
    p.add_argument("--noise", choices=("none", "poisson", "gaussian-clipped"), default="poisson")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--factors", help="also write the true factors to PREFIX_W and PREFIX_H")
    return parser


def _run_config(opts):
    if opts.kkt_every is not None and opts.kkt_every < 1:
        raise ValueError("--kkt-every must be >= 1")
    return RunConfig(
        max_iter=opts.max_iter,
        max_seconds=opts.max_seconds,
        compute_residual_every=opts.kkt_every,
        record_wall_time=not opts.no_wall_time,
    )


def _schedule(opts, algo):
    name = opts.schedule if algo in COUNTERPART else "none"
    return ExtrapolationState(name, c=opts.c, q=opts.q)


def solve_once(X, opts, algo, seed):
    """Run one algorithm from one seed; returns ``(summary dict, trace)``."""
    run = _run_config(opts)
    extrapolation = _schedule(opts, algo)
    if algo in ("mu", "mue"):
        config = BetaNmfConfig(beta=opts.beta, rank=opts.rank, epsilon=opts.epsilon, seed=seed)
        pair, trace, result = solve_mue(X, config, run, extrapolation, return_result=True)
        residual = kkt_residual(X, pair.W, pair.H, opts.beta, opts.epsilon)
    else:
        if opts.beta != 1.0:
            raise ValueError("min-vol algorithms need --beta 1")
        config = MinVolConfig(rank=opts.rank, lambda_tilde=opts.lambda_tilde, delta=opts.delta,
                              epsilon=opts.epsilon, seed=seed)
        pair, trace, result = solve_minvol(X, config, run, extrapolation, return_result=True)
        residual = coordinate_residual(X, pair.W, pair.H, pair.lambda1, config)
    last = trace[-1]
    summary = {
        "algo": algo,
        "seed": seed,
        "final_objective": last.objective,
        "final_rel_objective": last.rel_objective,
        "iters": result.iterations,
        "wall_seconds": last.wall_seconds,
        "kkt_residual": residual,
    }
    return summary, trace


def cmd_solve(opts):
    X = read_matrix(opts.data, opts.format)
    summary, trace = solve_once(X, opts, opts.algo, opts.seed)
    if opts.trace:
        write_trace(trace, opts.trace, opts.trace_format)
    print(json.dumps(summary))
    return 0


def crossing_iterations(fast, slow):
    """First iteration at which `fast` is strictly below the final value of `slow`, or None.

    Both are traces recorded every iteration.
    """
    target = slow[-1].objective
    for rec in fast:
        if rec.objective < target:
            return rec.iter
    return None


def _step_values(times, values, grid):
    idx = np.searchsorted(times, grid, side="right") - 1
    return np.asarray(values)[np.clip(idx, 0, None)]


def median_curves(traces, e_min, time_grid):
    """Median of ``objective - e_min`` over runs, by iteration and on a time grid.

    Runs shorter than the longest one drop out of the iteration median once
    they end. On the time grid each run holds its last recorded value.
    """
    n_iter = max(len(t) for t in traces)
    by_iter = []
    for k in range(n_iter):
        vals = [t[k].objective - e_min for t in traces if k < len(t)]
        by_iter.append(float(np.median(vals)))
    by_time = np.median(
        [_step_values(t.column("wall_seconds"), np.array(t.objectives) - e_min, time_grid) for t in traces],
        axis=0,
    )
    return by_iter, by_time.tolist()


def _bench_job(args):
    X, opts, algo, seed = args
    return solve_once(X, opts, algo, seed)


def _stats(values):
    reached = [v for v in values if v is not None]
    if not reached:
        return "not reached"
    return {
        "min": int(min(reached)),
        "median": float(np.median(reached)),
        "max": int(max(reached)),
        "reached": len(reached),
        "runs": len(values),
    }


def bench(X, opts, algos):
    """Run every algorithm from seeds ``0..opts.seeds-1``; returns the report dict.

    The report also carries the traces (key ``"traces"``, by algorithm, in
    seed order) for callers that want them.
    """
    jobs = [(X, opts, algo, seed) for algo in algos for seed in range(opts.seeds)]
    if opts.workers == 1:
        results = [_bench_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            results = list(pool.map(_bench_job, jobs))  # map keeps submission order
    traces = {a: [] for a in algos}
    summaries = []
    for summary, trace in results:
        traces[summary["algo"]].append(trace)
        summaries.append(summary)

    e_min = min(s["final_objective"] for s in summaries)
    t_end = max(t[-1].wall_seconds for ts in traces.values() for t in ts)
    time_grid = np.linspace(0.0, t_end, opts.time_points)
    curves = {a: median_curves(traces[a], e_min, time_grid) for a in algos}

    crossing = {}
    for fast, slow in COUNTERPART.items():
        if fast in traces and slow in traces:
            its = [crossing_iterations(f, s) for f, s in zip(traces[fast], traces[slow])]
            crossing[fast] = {"versus": slow, "per_seed": its, "summary": _stats(its)}

    return {
        "e_min": e_min,
        "runs": summaries,
        "crossing": crossing,
        "time_grid": time_grid.tolist(),
        "curves": curves,
        "traces": traces,
    }


def _write_curves(report, algos, out):
    os.makedirs(out, exist_ok=True)
    by_iter = [report["curves"][a][0] for a in algos]
    with open(os.path.join(out, "curves_iter.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter"] + algos)
        for k in range(max(len(c) for c in by_iter)):
            w.writerow([k] + [repr(c[k]) if k < len(c) else "" for c in by_iter])
    with open(os.path.join(out, "curves_time.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wall_seconds"] + algos)
        for k, t in enumerate(report["time_grid"]):
            w.writerow([repr(t)] + [repr(report["curves"][a][1][k]) for a in algos])
    public = {k: v for k, v in report.items() if k not in ("traces", "curves", "time_grid")}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(public, fh, indent=2)


def cmd_bench(opts):
    algos = [a.strip() for a in opts.algos.split(",") if a.strip()]
    unknown = [a for a in algos if a not in ALGOS]
    if unknown or not algos:
        raise ValueError(f"unknown algorithms: {unknown or opts.algos!r}")
    if len(set(algos)) != len(algos):
        raise ValueError("duplicate algorithms in --algos")
    if opts.data:
        X = read_matrix(opts.data, opts.format)
    else:
        X, _, _ = synth_lowrank(SyntheticSpec(opts.m, opts.n, opts.r_true, opts.noise, seed=opts.data_seed))
    report = bench(X, opts, algos)
    if opts.out:
        _write_curves(report, algos, opts.out)
    print(json.dumps({"e_min": report["e_min"],
                      "crossing": {k: v["summary"] for k, v in report["crossing"].items()}}))
    return 0


def cmd_synth(opts):
    spec = SyntheticSpec(opts.m, opts.n, opts.r_true, opts.noise, opts.scale, opts.seed, opts.sigma)
    X, W, H = synth_lowrank(spec)
    write_matrix(X, opts.out, opts.format)
    if opts.factors:
        ext = {"mm": "mtx", "csv": "csv", "bin": "bin"}[opts.format]
        write_matrix(W, f"{opts.factors}_W.{ext}", opts.format)
        write_matrix(H, f"{opts.factors}_H.{ext}", opts.format)
    return 0


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None):
    parser = build_parser()
    opts = parser.parse_args(argv)
    try:
        return COMMANDS[opts.command](opts)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"bmme {opts.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
