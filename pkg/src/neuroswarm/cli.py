"""Command-line front end.

Subcommands:
  run <scenario> [--out DIR] [--svg] [--dump-activity TICKS] [--seed N] [--workers N]
  batch <scenario> --runs N [--adaptation MODE] [--seed N] [--workers N] [--out DIR]
  sweep <scenario> --param NAME --values V1,V2,... [--runs N] [--seed N]
        [--workers N] [--out DIR]

Exit status: 0 success, 2 timeout/failed runs, 3 scenario error,
4 numerical divergence, 64 usage error.
"""

import argparse
import dataclasses
import sys
from pathlib import Path

from .binn import IntegrationDivergedError
from .engine import ScenarioError, run, run_batch
from .outputs import default_out_dir, dump_activity, write_batch_report, write_outputs
from .scenario import parse_scenario

EXIT_OK = 0
EXIT_TIMEOUT = 2
EXIT_SCENARIO = 3
EXIT_DIVERGED = 4
EXIT_USAGE = 64

SWEEPABLE = {
    "A": ("shunting", "A"), "mu": ("shunting", "mu"), "sigma": ("shunting", "sigma"),
    "beta": ("shunting", "beta"), "E": ("shunting", "E"), "r0": ("shunting", "r0"),
    "U": ("forces", "u"), "k_act": ("forces", "k_act"),
    "C_A": ("forces", "c_a"), "C_R": ("forces", "c_r"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    parser = _Parser(prog="neuroswarm",
                     description="Collective-escape swarm simulator")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="output directory "
                       "(default $NEUROSWARM_OUT or ./out)")
    p_run.add_argument("--svg", action="store_true", help="also write run.svg")
    p_run.add_argument("--dump-activity", default=None, metavar="TICKS",
                       help="comma-separated ticks at which to dump the "
                            "escape robot's activity field")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)

    p_batch = sub.add_parser("batch", help="seeded batch of runs")
    p_batch.add_argument("scenario")
    p_batch.add_argument("--runs", type=int, default=None)
    p_batch.add_argument("--adaptation", default=None,
                         choices=("neurodynamic", "distance_based", "fixed_ratio"))
    p_batch.add_argument("--seed", type=int, default=None)
    p_batch.add_argument("--workers", type=int, default=None)
    p_batch.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="batch per parameter value")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--param", required=True, choices=sorted(SWEEPABLE))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated numeric values")
    p_sweep.add_argument("--runs", type=int, default=None)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        config = parse_scenario(args.scenario)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        if args.workers is not None:
            config = dataclasses.replace(config, workers=args.workers)
        if args.command == "run":
            return _cmd_run(args, config)
        if args.command == "batch":
            return _cmd_batch(args, config)
        return _cmd_sweep(args, config)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except IntegrationDivergedError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def _out_dir(args) -> Path:
    return Path(args.out) if args.out else default_out_dir()


def _cmd_run(args, config) -> int:
    out = _out_dir(args)
    dump_ticks = ()
    if args.dump_activity:
        try:
            dump_ticks = tuple(int(t) for t in args.dump_activity.split(","))
        except ValueError:
            print(f"error: --dump-activity expects integers, got "
                  f"{args.dump_activity!r}", file=sys.stderr)
            return EXIT_USAGE
        out.mkdir(parents=True, exist_ok=True)

    def sink(tick, grid):
        dump_activity(grid, tick, out)

    result = run(config, dump_ticks=dump_ticks, dump_sink=sink)
    m = result.metrics
    write_outputs(m, result.records, out, svg=args.svg, result=result)
    print(f"{m.reason}: escape_time={m.escape_time:.1f}s "
          f"energy={m.energy_proxy:.2f} members_lost={m.members_lost} "
          f"min_gamma={m.min_gamma:.3f} ticks={m.ticks}")
    print(f"outputs in {out}")
    return EXIT_OK if m.success else EXIT_TIMEOUT


def _fmt_row(label, report) -> str:
    return (f"{label:>16}  {report.success_rate * 100.0:7.1f}%  "
            f"{report.escape_time_mean:8.1f}  {report.escape_time_std:7.2f}  "
            f"{report.energy_mean:9.2f}  {report.members_lost_runs:5d}")


_TABLE_HEADER = (f"{'configuration':>16}  {'success':>8}  {'time(s)':>8}  "
                 f"{'std':>7}  {'energy':>9}  {'lost':>5}")


def _cmd_batch(args, config) -> int:
    report = run_batch(config, n_runs=args.runs, workers=args.workers,
                       adaptation_mode=args.adaptation)
    out = _out_dir(args)
    write_batch_report(report, out)
    label = args.adaptation or config.adaptation_mode
    print(_TABLE_HEADER)
    print(_fmt_row(label, report))
    print(f"report in {out / 'batch.json'}")
    return EXIT_OK if report.success_rate == 1.0 else EXIT_TIMEOUT


def _cmd_sweep(args, config) -> int:
    try:
        values = [float(v) for v in args.values.split(",")]
    except ValueError:
        print(f"error: --values expects numbers, got {args.values!r}",
              file=sys.stderr)
        return EXIT_USAGE
    block, attr = SWEEPABLE[args.param]
    out = _out_dir(args)
    print(_TABLE_HEADER)
    all_ok = True
    for value in values:
        params = getattr(config, block)
        cast = int(value) if attr in ("n_relax", "window_radius") else value
        cfg = dataclasses.replace(
            config, **{block: dataclasses.replace(params, **{attr: cast})})
        report = run_batch(cfg, n_runs=args.runs, workers=args.workers)
        write_batch_report(report, out,
                           name=f"sweep_{args.param}_{value:g}.json")
        print(_fmt_row(f"{args.param}={value:g}", report))
        all_ok = all_ok and report.success_rate == 1.0
    print(f"reports in {out}")
    return EXIT_OK if all_ok else EXIT_TIMEOUT


if __name__ == "__main__":
    sys.exit(main())
