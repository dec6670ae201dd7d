"""Command-line entry point.

Subcommands:
    run --config <path>                       fit a model and write artifacts
    generate heston --count N --seed S --out  write a priced training grid
    baseline kernel-ridge --config <path>     kernel-regression benchmark
    eval --model <path> --data <path>         score a saved model on a CSV

Failures exit nonzero with a single ``ErrorClass: message`` line on stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import data as datamod
from .data import CLASSIFICATION, REGRESSION
from .experiment import (ConfigError, build_datasets, build_system,
                         compute_metrics, kernel_ridge_baseline, parse_config,
                         run_experiment)
from .heston import FftGrid
from .model_io import load_model


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    report = run_experiment(cfg)
    for name in ("rmse", "mape", "accuracy", "f1"):
        value = getattr(report, name)
        if value is not None:
            print(f"{name} = {value!r}")
    print(f"iterations = {report.iterations}")
    print(f"naive_cost = {report.naive_cost!r}")
    print(f"wall_time_s = {report.wall_time_s:.3f}")
    return 0


def _cmd_generate_heston(args) -> int:
    grid = FftGrid()
    dataset = datamod.generate_heston_grid(args.count, args.seed, grid=grid)
    header = (f"spot={datamod.HESTON_SPOT} seed={args.seed} "
              f"fft_damping={grid.damping} fft_nodes={grid.nodes} "
              f"fft_spacing={grid.spacing}")
    datamod.write_csv(dataset, args.out, label_column="price",
                      header_comment=header,
                      feature_names=list(datamod.HESTON_FEATURES))
    print(f"wrote {dataset.n} priced samples to {args.out}")
    return 0


def _cmd_baseline(args) -> int:
    cfg = parse_config(args.config)
    train, test = build_datasets(cfg)
    system = build_system(cfg, train)
    metrics = kernel_ridge_baseline(train, test, system.support,
                                    ridge=args.ridge)
    for name, value in metrics.items():
        print(f"{name} = {value!r}")
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    task = CLASSIFICATION if args.task == "classification" else REGRESSION
    dataset = datamod.load_csv(args.data, args.label_column, task=task)
    predictions = model.predict(dataset.inputs)
    metrics = compute_metrics(predictions, dataset.targets, task,
                              threshold=args.threshold)
    for name, value in metrics.items():
        print(f"{name} = {value!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kcontrol",
        description="Function learning with bilinear kernel control systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_gen = sub.add_parser("generate", help="generate training data")
    gen_sub = p_gen.add_subparsers(dest="what", required=True)
    p_heston = gen_sub.add_parser("heston", help="FFT-priced Heston call grid")
    p_heston.add_argument("--count", type=int, required=True)
    p_heston.add_argument("--seed", type=int, default=0)
    p_heston.add_argument("--out", required=True)
    p_heston.set_defaults(func=_cmd_generate_heston)

    p_base = sub.add_parser("baseline", help="benchmark methods")
    base_sub = p_base.add_subparsers(dest="which", required=True)
    p_kr = base_sub.add_parser("kernel-ridge",
                               help="linear regression on kernel features")
    p_kr.add_argument("--config", required=True)
    p_kr.add_argument("--ridge", type=float, default=0.0)
    p_kr.set_defaults(func=_cmd_baseline)

    p_eval = sub.add_parser("eval", help="score a saved model on a CSV")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--label-column", default="target")
    p_eval.add_argument("--task", choices=["regression", "classification"],
                        default="regression")
    p_eval.add_argument("--threshold", type=float, default=0.5)
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single machine-parsable line
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
