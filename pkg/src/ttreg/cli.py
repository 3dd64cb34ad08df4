"""Command-line entry point: experiment runner, model comparison, and
dataset generation."""

from __future__ import annotations

import argparse
import csv
import os
import sys

from ttreg.data import mackey_glass, teacher_mlp_data, write_series_csv
from ttreg.experiments import (
    FULL_TRIALS,
    ExperimentError,
    parse_config,
    run_experiment,
    write_comparison,
    write_experiment_outputs,
)


def _add_run_flags(parser: argparse.ArgumentParser):
    parser.add_argument("config", help="INI config with [experiment] and model sections")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--trials", type=int, default=None, help="override trial count")
    group.add_argument("--full", action="store_true",
                       help="full-scale trial counts (100/200/400 by experiment kind)")
    parser.add_argument("--seed", type=int, default=None, help="override base seed")
    parser.add_argument("--out", default=None, help="output directory (default: <config>_out)")
    parser.add_argument("--threads", type=int, default=os.cpu_count(),
                        help="worker pool size (default: number of cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttreg",
        description="Tensor-train multilinear regression experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run every model in a config over seeded trials")
    _add_run_flags(run_p)
    cmp_p = sub.add_parser("compare", help="run and emit a side-by-side winners table")
    _add_run_flags(cmp_p)

    gen = sub.add_parser("gen-data", help="generate datasets in ingestable CSV form")
    gen_sub = gen.add_subparsers(dest="dataset", required=True)

    mg = gen_sub.add_parser("mackey-glass", help="chaotic delayed-feedback series")
    mg.add_argument("--out", required=True)
    mg.add_argument("--samples", type=int, default=1000)
    mg.add_argument("--tau", type=float, default=17.0)
    mg.add_argument("--dt", type=float, default=1.0)
    mg.add_argument("--discard", type=int, default=100)
    mg.add_argument("--noise-sd", type=float, default=0.0)
    mg.add_argument("--seed", type=int, default=0)

    te = gen_sub.add_parser("teacher", help="random two-layer teacher network data")
    te.add_argument("--out", required=True)
    te.add_argument("--samples", type=int, default=10000)
    te.add_argument("--inputs", type=int, default=10)
    te.add_argument("--hidden", type=int, default=200)
    te.add_argument("--activation", choices=("tanh", "relu"), default="tanh")
    te.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args, compare: bool) -> int:
    config = parse_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    trials = args.trials
    if args.full:
        trials = FULL_TRIALS[config.kind]
    out_dir = args.out
    if out_dir is None:
        stem = os.path.splitext(os.path.basename(args.config))[0]
        out_dir = f"{stem}_out"
    result = run_experiment(config, threads=args.threads, trials=trials)
    paths = write_experiment_outputs(result, out_dir)
    if compare:
        cmp_path, warnings = write_comparison(result, out_dir)
        paths["comparison"] = cmp_path
        for warning in warnings:
            print(f"warning: {warning}", file=sys.stderr)
    for model in result.models:
        score = model.aggregates.get("test_score", (float("nan"),))[0]
        print(
            f"{model.spec.name}: coeffs={model.n_coefficients} "
            f"trials={result.trials_run} aborted={model.n_aborted} "
            f"mean test score={score:.4f}"
        )
    print(f"outputs in {out_dir}: {', '.join(sorted(os.path.basename(p) for p in paths.values()))}")
    return 0


def _cmd_gen_data(args) -> int:
    if args.dataset == "mackey-glass":
        series = mackey_glass(
            n_samples=args.samples, tau=args.tau, dt=args.dt,
            discard=args.discard, noise_sd=args.noise_sd, seed=args.seed,
        )
        write_series_csv(series, args.out)
        print(f"wrote {args.samples} samples to {args.out}")
        return 0
    x, y, teacher = teacher_mlp_data(
        n_samples=args.samples, n_inputs=args.inputs, hidden=args.hidden,
        activation=args.activation, seed=args.seed,
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(args.inputs)] + ["y"])
        for row, target in zip(x, y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])
    print(f"wrote {args.samples} samples from a {teacher.param_count()}-coefficient "
          f"teacher to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args, compare=False)
        if args.command == "compare":
            return _cmd_run(args, compare=True)
        if args.command == "gen-data":
            return _cmd_gen_data(args)
    except (ExperimentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
