"""Command-line interface.

Subcommands: simulate (one trial), sweep (Monte Carlo parameter sweep from the
config file), grid (status-grid comparison at the demo profile), bench
(timing), oracle-check (engine-vs-oracle equivalence suite). Exit codes:
0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments, plotting
from .config import (ConfigurationError, NumericalError, RunSettings,
                     load_config, paper_profile, parse_algorithm_token)
from .metrics import emit_status_grid, status_grid, switch_count
from .oracle import equivalence_suite
from .solvers import solve_offline, solve_online


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="beamadmit",
        description="Long-term admission control and beamforming simulator")
    parser.add_argument("--config", help="INI config file", default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--trace", action="store_true",
                        help="also dump solver objective traces")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one trial and dump plan + metrics")
    sim.add_argument("--algorithm", default="online",
                     help="no_control | offline | online[_jK] | channel_strength")

    sub.add_parser("sweep", help="run the sweep defined in the config file")
    sub.add_parser("grid", help="status-grid comparison (demo profile by default)")
    sub.add_parser("bench", help="timing benchmark")
    sub.add_parser("oracle-check", help="engine-vs-oracle equivalence suite")
    return parser


def _metrics_rows(metrics):
    fields = experiments._metric_fields(metrics)
    return [(k, experiments._fmt(v)) for k, v in fields.items()]


def _cmd_simulate(args, settings: RunSettings, out):
    algo, j = parse_algorithm_token(args.algorithm)
    metrics, plan = experiments.run_trial(
        algo, args.seed, settings.problem, settings.geometry,
        J=j or 9, workers=args.workers, cache_dir=out / "cache")
    experiments.write_plan_csv(plan, out / "plan.csv")
    emit_status_grid(plan, out / "status_grid.csv")
    plotting.save_status_grids([status_grid(plan)], [args.algorithm],
                               out / "status_grid.png")
    with open(out / "metrics.csv", "w") as fh:
        fh.write("# trial metrics v1\nmetric,value\n")
        for key, value in _metrics_rows(metrics):
            fh.write(f"{key},{value}\n")
    print(f"{args.algorithm}: total cost {metrics.cost.total:.6g}, "
          f"admission ratio {metrics.admission_ratio:.3f}, "
          f"switching frequency {metrics.switching_frequency:.3f}")
    print(f"wrote plan.csv, metrics.csv, status_grid.csv/png to {out}")
    return 0


def _cmd_sweep(args, settings: RunSettings, out):
    if settings.sweep is None:
        raise ConfigurationError("missing config key: sweep.parameter "
                                 "(the sweep subcommand needs a [sweep] section)")
    spec = settings.sweep
    if args.seed:
        spec = type(spec)(**{**spec.__dict__, "master_seed": args.seed})
    rows, aggregates = experiments.run_sweep(spec, settings.problem, settings.geometry,
                                             out / "sweep.csv", workers=args.workers)
    figures = plotting.save_sweep_figures(aggregates, spec.parameter, out)
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} trial rows) and "
          f"{len(figures)} figures")
    return 0


def _cmd_grid(args, settings: RunSettings, out):
    config = settings.problem if args.config else paper_profile()
    channels = experiments.make_channels(config, settings.geometry, args.seed)
    grids, titles = [], []
    from .baselines import solve_no_control

    for name, runner in (
            ("no_control", lambda: solve_no_control(channels, config)),
            ("offline", lambda: solve_offline(channels, config)[0]),
            ("online_j9", lambda: solve_online(channels, config, 9, args.seed)[0])):
        plan = runner()
        emit_status_grid(plan, out / f"status_grid_{name}.csv")
        grids.append(status_grid(plan))
        titles.append(f"{name}: {switch_count(plan)} switches")
        print(f"{name}: {switch_count(plan)} status switches")
    plotting.save_status_grids(grids, titles, out / "status_grids.png")
    print(f"wrote status grids to {out}")
    return 0


def _cmd_bench(args, settings: RunSettings, out):
    rows = experiments.bench_timing(settings.problem, seed=args.seed)
    experiments.write_bench_csv(rows, out / "bench.csv")
    plotting.save_bench_figure(rows, out / "bench.png")
    print(f"wrote {out / 'bench.csv'} and bench.png")
    return 0


def _cmd_oracle_check(args, settings: RunSettings, out):
    results = equivalence_suite(settings.problem, seed=args.seed)
    bad = [r for r in results if not r["ok"]]
    for r in results:
        print(f"{r['kind']}#{r['index']} M={r['M']} N={r['N']} depth={r['depth']}: "
              f"rel gap {r['rel_gap']:.2e} {'ok' if r['ok'] else 'FAIL'}")
    if bad:
        raise NumericalError(f"{len(bad)} oracle-equivalence instances out of tolerance")
    print(f"all {len(results)} instances within 1e-3 of the reference oracle")
    return 0


_COMMANDS = {"simulate": _cmd_simulate, "sweep": _cmd_sweep, "grid": _cmd_grid,
             "bench": _cmd_bench, "oracle-check": _cmd_oracle_check}


def cli_main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_config(args.config) if args.config else RunSettings()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, settings, out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main():
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
