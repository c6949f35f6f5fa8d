"""Command-line entry points: run an experiment, compare traces, dump a dataset."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .experiment import (
    ConfigError,
    ExperimentConfig,
    TrainingDiverged,
    compare_runs,
    dataset_from_config,
    format_comparison,
    run_experiment,
)
from .synthetic import save_dataset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percentmatch",
        description=(
            "Percentile-based dynamic thresholding for multi-label "
            "semi-supervised learning, on a synthetic desk-scale harness."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train one configuration and write a trace")
    run_p.add_argument("config", help="path to a flat key=value config file")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--out", default=None, help="trace output path (.jsonl)")

    cmp_p = sub.add_parser("compare", help="tabulate final metrics across trace files")
    cmp_p.add_argument("traces", nargs="+", help="two or more trace files")
    cmp_p.add_argument("--out", default=None, help="also write the summary as JSON")

    gen_p = sub.add_parser("gen-data", help="write the dataset a config would train on")
    gen_p.add_argument("config", help="path to a flat key=value config file")
    gen_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    gen_p.add_argument(
        "--out", required=True, help="output prefix; writes <prefix>.{labeled,unlabeled,test}.txt"
    )
    return parser


def _load_config(path: str, seed: int | None) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, args.seed)
    out = args.out or f"trace_{cfg.method}_seed{cfg.seed}.jsonl"
    report, path = run_experiment(cfg, out)
    mean_ap = "n/a" if report.mean_ap is None else f"{report.mean_ap:.4f}"
    macro_auc = "n/a" if report.macro_auc is None else f"{report.macro_auc:.4f}"
    print(f"method={cfg.method} seed={cfg.seed} final mAP={mean_ap} macro AUC={macro_auc}")
    print(f"trace written to {path}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    summary = compare_runs(args.traces)
    print(format_comparison(summary))
    if args.out:
        Path(args.out).write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"summary written to {args.out}")
    return 0


def _cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, args.seed)
    cfg.validate()
    labeled, unlabeled, test = dataset_from_config(cfg)
    for split, name in ((labeled, "labeled"), (unlabeled, "unlabeled"), (test, "test")):
        path = f"{args.out}.{name}.txt"
        save_dataset(split, path)
        print(f"wrote {split.n_samples} samples to {path}")
    return 0


_COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "gen-data": _cmd_gen_data}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TrainingDiverged as exc:
        record = {
            "error": "training-diverged",
            "message": str(exc),
            "iteration": exc.iteration,
        }
    except (ConfigError, ValueError) as exc:
        record = {"error": "invalid-argument", "message": str(exc)}
    except OSError as exc:
        record = {"error": "io", "message": str(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
