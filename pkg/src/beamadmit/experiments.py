"""Monte Carlo trials, parameter sweeps, timing benches, and their CSV output.

All emitted CSVs are deterministic functions of (config, master seed): result
rows are sorted by (value, algorithm, samples, trial) regardless of worker
scheduling, floats are rendered with 9 significant digits, and wall-clock
times are kept out of trial tables (they live in RunMetrics and the bench
outputs only).
"""

from __future__ import annotations

import csv
import hashlib
import multiprocessing
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import channel as chan
from .baselines import channel_strength_plan, solve_no_control
from .config import (ALGORITHMS, CellGeometry, ConfigurationError, ProblemConfig,
                     SWEEP_PARAMS, SweepSpec)
from .metrics import RunMetrics, compute_metrics, status_grid
from .oracle import reference_oracle
from .solvers import solve_offline, solve_online


def make_channels(config: ProblemConfig, geometry: CellGeometry, seed):
    """Scenario placement plus one channel horizon for a trial seed."""
    scenario = chan.place_users(geometry, config.num_users, seed)
    return chan.sample_horizon(scenario, config.num_antennas, config.num_slices, seed)


def _config_key(config, geometry, seed, samples):
    text = repr((config, geometry, int(seed), int(samples)))
    return hashlib.sha1(text.encode()).hexdigest()[:16]


def _cached_online_counts(config, geometry, seed, samples, cache_dir, channels):
    """Admitted counts K(t) of the same-seed online run, disk-cached."""
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"online{samples}_{_config_key(config, geometry, seed, samples)}.csv"
        if path.exists():
            grid = np.loadtxt(path, delimiter=",", dtype=int, ndmin=2)
            return grid.sum(axis=1)
    plan, _ = solve_online(channels, config, samples, seed)
    grid = status_grid(plan)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, grid, fmt="%d", delimiter=",")
    return grid.sum(axis=1)


def run_trial(algorithm, seed, config: ProblemConfig, geometry: CellGeometry,
              J=None, *, workers=None, cache_dir=None, online_reference=None):
    """Run one algorithm on one seeded scenario; returns (RunMetrics, plan).

    channel_strength matches its per-slice admitted counts to a same-seed
    online run with J=9 (reused from `online_reference` or the disk cache
    when available).
    """
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}")
    channels = make_channels(config, geometry, seed)
    start = time.perf_counter()
    admm_iters = sum_iters = 0
    if algorithm == "no_control":
        plan = solve_no_control(channels, config, workers=workers)
    elif algorithm == "offline":
        plan, info = solve_offline(channels, config, workers=workers)
        admm_iters, sum_iters = info.admm_iterations, info.sum_iterations
    elif algorithm == "online":
        plan, info = solve_online(channels, config, J if J is not None else 9,
                                  seed, workers=workers)
        admm_iters, sum_iters = info.admm_iterations, info.sum_iterations
    else:   # channel_strength
        if online_reference is not None:
            counts = status_grid(online_reference).sum(axis=1)
        else:
            counts = _cached_online_counts(config, geometry, seed, 9, cache_dir, channels)
        plan = channel_strength_plan(channels, config, counts)
    wall = time.perf_counter() - start
    metrics = compute_metrics(plan, config, wall_time_s=wall,
                              admm_iterations=admm_iters, sum_iterations=sum_iters)
    return metrics, plan


def _apply_parameter(config: ProblemConfig, parameter, value):
    field = SWEEP_PARAMS[parameter]
    if field is None:   # J: handled by the per-algorithm sample count
        return config
    if parameter == "M":
        return replace(config, num_users=int(value), initial_status=())
    return replace(config, **{field: float(value)})


def _trial_seed(master_seed, trial):
    return chan.derive_seed(master_seed, chan.TAG_TRIAL, trial)


def _group_rows(args):
    """All requested algorithms for one (parameter value, trial) cell."""
    spec, config, geometry, value, trial = args
    cfg = _apply_parameter(config, spec.parameter, value)
    seed = _trial_seed(spec.master_seed, trial)
    algos = [(a, (int(value) if spec.parameter == "J" and a == "online" else j))
             for a, j in spec.algorithms]
    online_plans = {}
    rows = []
    for algo, j in algos:
        if algo == "online":
            metrics, plan = run_trial(algo, seed, cfg, geometry, J=j)
            online_plans[j] = plan
        elif algo == "channel_strength":
            ref = online_plans.get(9)
            if ref is None:
                _, ref = run_trial("online", seed, cfg, geometry, J=9)
                online_plans[9] = ref
            metrics, plan = run_trial(algo, seed, cfg, geometry, online_reference=ref)
        else:
            metrics, plan = run_trial(algo, seed, cfg, geometry)
        rows.append({"parameter": spec.parameter, "value": value, "algorithm": algo,
                     "samples": j if algo == "online" else "",
                     "trial": trial, "seed": seed, "metrics": metrics})
    return rows


SWEEP_COLUMNS = ("parameter", "value", "algorithm", "samples", "trial", "seed",
                 "admission_ratio", "switching_frequency", "transmit_power",
                 "reject_cost", "switch_cost", "total_cost",
                 "admm_iterations", "sum_iterations")


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def _metric_fields(metrics: RunMetrics):
    return {"admission_ratio": metrics.admission_ratio,
            "switching_frequency": metrics.switching_frequency,
            "transmit_power": metrics.cost.transmit_power,
            "reject_cost": metrics.cost.reject_cost,
            "switch_cost": metrics.cost.switch_cost,
            "total_cost": metrics.cost.total,
            "admm_iterations": metrics.admm_iterations,
            "sum_iterations": metrics.sum_iterations}


def run_sweep(spec: SweepSpec, config: ProblemConfig, geometry: CellGeometry,
              out_path=None, *, workers=1):
    """Run the sweep and return (data rows, aggregate rows); optionally write CSV.

    Trials are distributed over a process pool; output ordering and content do
    not depend on the worker count. Aggregates carry the per-(value, algorithm)
    mean and standard error of each metric column.
    """
    cells = [(spec, config, geometry, value, trial)
             for value in spec.values for trial in range(spec.trials)]
    if workers and workers > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            groups = pool.map(_group_rows, cells)
    else:
        groups = [_group_rows(cell) for cell in cells]

    rows = []
    for group in groups:
        for item in group:
            row = {k: item[k] for k in ("parameter", "value", "algorithm",
                                        "samples", "trial", "seed")}
            row.update(_metric_fields(item["metrics"]))
            rows.append(row)
    value_order = {v: i for i, v in enumerate(spec.values)}
    algo_order = {a: i for i, a in enumerate(ALGORITHMS)}
    rows.sort(key=lambda r: (value_order[r["value"]], algo_order[r["algorithm"]],
                             r["samples"] if r["samples"] != "" else -1, r["trial"]))

    aggregates = []
    metric_cols = SWEEP_COLUMNS[6:]
    for value in spec.values:
        seen = []
        for row in rows:
            key = (row["algorithm"], row["samples"])
            if row["value"] == value and key not in seen:
                seen.append(key)
        for algo, samples in seen:
            block = [r for r in rows
                     if r["value"] == value and r["algorithm"] == algo
                     and r["samples"] == samples]
            for stat in ("mean", "stderr"):
                agg = {"parameter": spec.parameter, "value": value, "algorithm": algo,
                       "samples": samples, "trial": stat, "seed": ""}
                for col in metric_cols:
                    data = np.array([float(r[col]) for r in block])
                    agg[col] = data.mean() if stat == "mean" else \
                        (data.std(ddof=1) / np.sqrt(len(data)) if len(data) > 1 else 0.0)
                aggregates.append(agg)

    if out_path is not None:
        write_sweep_csv(rows + aggregates, out_path)
    return rows, aggregates


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write("# sweep table v1, one row per (value, algorithm, trial); "
                 "trial=mean/stderr rows aggregate over trials\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])


def write_plan_csv(plan, path):
    """Plan dump: one row per (t, m) with slack, status, and beam power."""
    grid = status_grid(plan)
    with open(path, "w", newline="") as fh:
        fh.write("# plan v1\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "m", "v", "status", "beam_power"])
        T, M = plan.v.shape
        for t in range(T):
            for m in range(M):
                power = float(np.sum(np.abs(plan.W[t, :, m]) ** 2))
                writer.writerow([t, m, _fmt(plan.v[t, m]), int(grid[t, m]), _fmt(power)])


def write_trace_csv(trace, path, header):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        writer = csv.writer(fh)
        writer.writerow(["iteration", "value"]) if np.ndim(trace[0]) == 0 else \
            writer.writerow(["iteration", "primal", "dual", "objective"])
        for i, item in enumerate(trace):
            if np.ndim(item) == 0:
                writer.writerow([i + 1, _fmt(item)])
            else:
                writer.writerow([item[0]] + [_fmt(x) for x in item[1:]])


# ---------------------------------------------------------------- benchmarks

def _bench_instance(M, N, J, seed, config):
    from .oracle import random_star_instance

    return random_star_instance(M, N, J, seed, config)


def measure_admm_iteration(M, N, J, config, seed=0, iters=150, repeats=3):
    """Mean serial seconds per ADMM iteration on a random star instance."""
    from .admm import solve_convex

    graph, vtilde = _bench_instance(M, N, J, seed, config)
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        solve_convex(graph, vtilde, config, tol=0.0, max_iter=iters)
        best = min(best, (time.perf_counter() - start) / iters)
    return best


def bench_timing(config: ProblemConfig, *, m_values=(4, 8, 16), j_values=(2, 4, 8, 16),
                 contrast_m=(4, 8, 16), seed=0, iters=150):
    """Timing table for the scaling claims and the oracle contrast.

    Three curves: per-iteration time vs J (N=5, M=10); vs M at fixed N=32 so
    the N^2 M work term dominates and the trend is linear; and an ADMM-vs-
    reference-oracle contrast at N=3, J=1 where the oracle's size guard
    allows it. Simulated-parallel time divides by the J+1 node groups.
    Normalized columns divide by each curve's largest value.
    """
    rows = []
    for J in j_values:
        t = measure_admm_iteration(10, 5, J, config, seed, iters)
        rows.append({"curve": "j_scaling", "M": 10, "N": 5, "J": J, "nodes": J + 1,
                     "admm_iter_s": t, "admm_parallel_iter_s": t / (J + 1),
                     "oracle_solve_s": ""})
    for M in m_values:
        t = measure_admm_iteration(M, 32, 3, config, seed, iters)
        rows.append({"curve": "m_scaling", "M": M, "N": 32, "J": 3, "nodes": 4,
                     "admm_iter_s": t, "admm_parallel_iter_s": t / 4,
                     "oracle_solve_s": ""})
    for M in contrast_m:
        graph, vtilde = _bench_instance(M, 3, 1, seed, config)
        t = measure_admm_iteration(M, 3, 1, config, seed, iters)
        start = time.perf_counter()
        reference_oracle(graph, vtilde, config, tol=1e-6, max_outer=12)
        oracle_t = time.perf_counter() - start
        rows.append({"curve": "oracle_contrast", "M": M, "N": 3, "J": 1, "nodes": 2,
                     "admm_iter_s": t, "admm_parallel_iter_s": t / 2,
                     "oracle_solve_s": oracle_t})
    for curve in {r["curve"] for r in rows}:
        block = [r for r in rows if r["curve"] == curve]
        top = max(r["admm_iter_s"] for r in block)
        for r in block:
            r["admm_iter_norm"] = r["admm_iter_s"] / top
            r["oracle_norm"] = ""
        oracle_vals = [r["oracle_solve_s"] for r in block if r["oracle_solve_s"] != ""]
        if oracle_vals:
            top_o = max(oracle_vals)
            for r in block:
                if r["oracle_solve_s"] != "":
                    r["oracle_norm"] = r["oracle_solve_s"] / top_o
    return rows


BENCH_COLUMNS = ("curve", "M", "N", "J", "nodes", "admm_iter_s",
                 "admm_parallel_iter_s", "oracle_solve_s", "admm_iter_norm", "oracle_norm")


def write_bench_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write("# bench table v1; normalized columns divide by each curve's "
                 "largest measured value; parallel time = serial / node groups\n")
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in BENCH_COLUMNS])
