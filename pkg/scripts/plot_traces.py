#!/usr/bin/env python3
"""Plot threshold traces, gap traces, unlabeled weights, and gap-vs-AUC from a trace file.

Produces a four-panel figure: per-class positive/negative score thresholds over
iterations, the per-class threshold gap, the applied unlabeled loss weights,
and a scatter of final per-class gap against final per-class ROC-AUC.
"""

import argparse

import numpy as np

from percentmatch import read_trace


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("trace", help="trace file from a percentmatch run")
    parser.add_argument("--out", default=None, help="image path (default: show window)")
    parser.add_argument(
        "--classes", type=int, nargs="+", default=None,
        help="class indices to plot (default: 4 classes spread across the frequency range)",
    )
    args = parser.parse_args()

    try:
        import matplotlib.pyplot as plt
    except ImportError as exc:  # plotting is optional: pip install percentmatch[plot]
        raise SystemExit(f"matplotlib is required for plotting: {exc}")

    header, iters, evals = read_trace(args.trace)
    n_classes = header["config"]["n_classes"]
    classes = args.classes or list(np.linspace(0, n_classes - 1, 4).astype(int))

    t = np.array([rec["t"] for rec in iters])
    tau_plus = np.array([rec["tau_plus"] for rec in iters])
    tau_minus = np.array([rec["tau_minus"] for rec in iters])
    gap = np.array([rec["gap"] for rec in iters])
    alpha = np.array([rec["alpha"] for rec in iters])

    fig, axes = plt.subplots(2, 2, figsize=(11, 8))
    for c in classes:
        axes[0, 0].plot(t, tau_plus[:, c], label=f"class {c} (+)")
        axes[0, 0].plot(t, tau_minus[:, c], linestyle="--", label=f"class {c} (-)")
        axes[0, 1].plot(t, gap[:, c], label=f"class {c}")
        axes[1, 0].plot(t, alpha[:, c], label=f"class {c}")
    axes[0, 0].set_title("score thresholds")
    axes[0, 1].set_title("threshold gap")
    axes[1, 0].set_title("unlabeled loss weight")
    for ax in (axes[0, 0], axes[0, 1], axes[1, 0]):
        ax.set_xlabel("iteration")
        ax.legend(fontsize=7)

    final_auc = np.array(evals[-1]["per_class_auc"], dtype=float)
    final_gap = gap[-1]
    axes[1, 1].scatter(final_gap, final_auc)
    axes[1, 1].set_xlabel("final threshold gap")
    axes[1, 1].set_ylabel("final class ROC-AUC")
    axes[1, 1].set_title("gap vs AUC")
    fig.suptitle(f"{header['config']['method']} seed={header['config']['seed']}")
    fig.tight_layout()

    if args.out:
        fig.savefig(args.out, dpi=130)
        print(f"wrote {args.out}")
    else:
        plt.show()


if __name__ == "__main__":
    main()
