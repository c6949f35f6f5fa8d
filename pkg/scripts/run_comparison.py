#!/usr/bin/env python3
"""Run the three training modes over several seeds and tabulate final metrics.

Writes one trace per (method, seed) into the output directory, then prints the
same comparison table the ``percentmatch compare`` subcommand produces.
"""

import argparse
import dataclasses
import json
from pathlib import Path

from percentmatch import ExperimentConfig, compare_runs, run_experiment
from percentmatch.experiment import METHODS, format_comparison


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--out-dir", default="comparison_runs")
    parser.add_argument("--config", default=None, help="base config file (defaults otherwise)")
    parser.add_argument(
        "--methods", nargs="+", default=list(METHODS), choices=METHODS
    )
    args = parser.parse_args()

    base = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = []
    for method in args.methods:
        for seed in args.seeds:
            cfg = dataclasses.replace(base, method=method, seed=seed)
            trace = out_dir / f"{method}-seed{seed}.jsonl"
            report, _ = run_experiment(cfg, trace)
            paths.append(trace)
            print(
                f"{method:16s} seed={seed} mAP={report.mean_ap:.4f} "
                f"macro AUC={report.macro_auc:.4f}"
            )

    summary = compare_runs(paths)
    print()
    print(format_comparison(summary))
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"\nsummary written to {summary_path}")


if __name__ == "__main__":
    main()
