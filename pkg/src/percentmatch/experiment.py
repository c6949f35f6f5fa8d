"""End-to-end experiment orchestration: config, training loop, traces, comparison.

One experiment is one seeded run of a method ("percentmatch",
"fixmatch-fixed", or "supervised-only") on one synthetic dataset. Every
iteration appends a structured record to a line-delimited JSON trace;
evaluation reports are interleaved periodically. Reruns of the same config and
seed reproduce the trace byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .histogram import ClassHistogram
from .losses import (
    LossConfig,
    supervised_grad,
    supervised_loss,
    unlabeled_grad,
    unlabeled_loss_per_class,
    total_loss,
)
from .metrics import AP_DEFINITION, EvalReport, evaluate, pseudo_label_quality
from .model import Adam, ToyClassifier
from .pseudolabel import select
from .synthetic import AugmentationPolicy, SyntheticDataset, augment, generate_dataset
from .thresholds import (
    ThresholdState,
    WeightSchedule,
    fixed_thresholds,
    init_class_percentiles,
    loss_weight,
    refresh_thresholds,
)

METHODS = ("percentmatch", "fixmatch-fixed", "supervised-only")

TRACE_FIELDS = {
    "t": "iteration index, 0-based",
    "tau_plus": "per-class positive score threshold",
    "tau_minus": "per-class negative score threshold",
    "gap": "per-class threshold gap tau_plus - tau_minus",
    "alpha": "per-class unlabeled loss weight actually applied",
    "sel_pos": "per-class count of positive pseudo-labels selected in the batch",
    "sel_neg": "per-class count of negative pseudo-labels selected in the batch",
    "loss_sup": "supervised loss",
    "loss_unl": "unweighted unlabeled loss",
    "loss_total": "total objective actually optimized",
}


class ConfigError(ValueError):
    """Invalid experiment configuration, raised before any training happens."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite mid-run."""

    def __init__(self, iteration: int, loss_sup: float, loss_unl: float):
        self.iteration = iteration
        self.loss_sup = loss_sup
        self.loss_unl = loss_unl
        super().__init__(
            f"non-finite loss at iteration {iteration} "
            f"(supervised={loss_sup}, unlabeled={loss_unl})"
        )


@dataclass
class ExperimentConfig:
    """Everything that defines one run. Field names double as config-file keys."""

    seed: int = 0
    # dataset
    n_samples: int = 5000
    n_classes: int = 20
    n_features: int = 50
    imbalance_ratio: float = 20.0
    label_fraction: float = 0.1
    p_max: float = 0.5
    test_fraction: float = 0.4
    proto_scale: float = 8.0
    proto_rank: int = 16
    noise_scale: float = 0.7
    # method and thresholds
    method: str = "percentmatch"
    kappa_plus: float = 0.98
    kappa_minus: float = 0.1
    clamp_kappa_minus: bool = True
    fixed_tau_plus: float = 0.95
    fixed_tau_minus: float = 0.0
    decay: float = 0.99
    n_bins: int = 100
    # batching and unlabeled weighting
    batch_size: int = 36
    mu: int = 1
    start_gap: float = 0.5
    saturate_gap: float = 0.55
    saturate_weight: float = 1.0
    warmup_iters: int = 300
    scalar_alpha: bool = False
    # loss
    loss_kind: str = "bce"
    gamma_pos: float = 0.0
    gamma_neg: float = 0.0
    clip: float = 0.0
    per_selected_norm: bool = False
    # model and optimization
    hidden_dim: int = 192
    init_scale: float = 0.1
    lr: float = 3e-4
    lr_schedule: str = "constant"
    total_iters: int = 4000
    eval_every: int = 200
    # augmentation
    weak_noise: float = 0.05
    strong_noise: float = 3.0
    strong_dropout: float = 0.35

    # Fields that must match for two runs to be comparable (same data).
    DATASET_FIELDS = (
        "seed",
        "n_samples",
        "n_classes",
        "n_features",
        "imbalance_ratio",
        "label_fraction",
        "p_max",
        "test_fraction",
        "proto_scale",
        "proto_rank",
        "noise_scale",
    )

    def validate(self) -> None:
        problems = []
        if self.method not in METHODS:
            problems.append(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 <= self.kappa_minus < self.kappa_plus <= 1.0:
            problems.append(
                f"need 0 <= kappa_minus < kappa_plus <= 1, got {self.kappa_minus}, {self.kappa_plus}"
            )
        if not 0.0 <= self.fixed_tau_minus <= self.fixed_tau_plus <= 1.0:
            problems.append("need 0 <= fixed_tau_minus <= fixed_tau_plus <= 1")
        if not 0.0 <= self.decay <= 1.0:
            problems.append(f"decay must lie in [0, 1], got {self.decay}")
        if self.n_bins < 1:
            problems.append("n_bins must be >= 1")
        if self.batch_size < 1 or self.mu < 1:
            problems.append("batch_size and mu must be >= 1")
        if self.total_iters < 1:
            problems.append("total_iters must be >= 1")
        if self.eval_every < 1:
            problems.append("eval_every must be >= 1")
        if self.lr <= 0:
            problems.append("lr must be positive")
        if self.lr_schedule not in ("constant", "warmup-decay"):
            problems.append(f"lr_schedule must be constant or warmup-decay, got {self.lr_schedule!r}")
        if self.proto_rank < 0 or self.proto_rank > self.n_features:
            problems.append(
                f"proto_rank must lie in [0, n_features], got {self.proto_rank}"
            )
        n_labeled = int(round(self.label_fraction * self.n_samples))
        if self.batch_size > n_labeled:
            problems.append(
                f"batch_size {self.batch_size} exceeds the labeled split ({n_labeled} samples)"
            )
        if self.mu * self.batch_size > self.n_samples - n_labeled:
            problems.append(
                f"unlabeled batch {self.mu * self.batch_size} exceeds the unlabeled split "
                f"({self.n_samples - n_labeled} samples)"
            )
        # Construction of these validates their own fields.
        try:
            WeightSchedule(self.start_gap, self.saturate_gap, self.saturate_weight, self.warmup_iters)
        except ValueError as exc:
            problems.append(str(exc))
        try:
            self.loss_config()
        except ValueError as exc:
            problems.append(str(exc))
        try:
            AugmentationPolicy(self.weak_noise, self.strong_noise, self.strong_dropout)
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigError("; ".join(problems))

    def loss_config(self) -> LossConfig:
        return LossConfig(
            kind=self.loss_kind,
            gamma_pos=self.gamma_pos,
            gamma_neg=self.gamma_neg,
            clip=self.clip,
            batch_size=self.batch_size,
            mu=self.mu,
            per_selected_norm=self.per_selected_norm,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dataset_key(self) -> dict:
        return {name: getattr(self, name) for name in self.DATASET_FIELDS}

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        parsed = {}
        for key, raw in values.items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[key] = _coerce(raw, fields[key].type, key)
        return cls(**parsed)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Parse a flat ``key = value`` config file (``#`` starts a comment)."""
        values: dict[str, str] = {}
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, raw = line.partition("=")
            elif ":" in line:
                key, _, raw = line.partition(":")
            else:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key = key.strip()
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = raw.strip()
        return cls.from_dict(values)


def _coerce(raw, annotation, key: str):
    if not isinstance(raw, str):
        return raw
    annotation = str(annotation)
    try:
        if annotation == "bool":
            lowered = raw.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if annotation == "int":
            return int(raw)
        if annotation == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def dataset_from_config(cfg: ExperimentConfig):
    """The (labeled, unlabeled, test) splits a run with this config trains on.

    Data generation draws from a child seed of ``cfg.seed`` so that the
    training loop's own randomness cannot perturb the dataset.
    """
    data_seed, _ = np.random.SeedSequence(cfg.seed).spawn(2)
    return generate_dataset(
        data_seed,
        cfg.n_samples,
        cfg.n_classes,
        cfg.n_features,
        cfg.imbalance_ratio,
        cfg.label_fraction,
        p_max=cfg.p_max,
        test_fraction=cfg.test_fraction,
        proto_scale=cfg.proto_scale,
        proto_rank=cfg.proto_rank,
        noise_scale=cfg.noise_scale,
    )


def _json_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"


def _floats(arr) -> list[float]:
    return [float(v) for v in np.asarray(arr).ravel()]


def _ints(arr) -> list[int]:
    return [int(v) for v in np.asarray(arr).ravel()]


def _lr_at(cfg: ExperimentConfig, t: int) -> float:
    if cfg.lr_schedule == "constant":
        return cfg.lr
    # Rough one-cycle stand-in: linear ramp to the peak over the first 30%,
    # then linear decay toward (but not to) zero.
    peak_at = max(int(0.3 * cfg.total_iters), 1)
    if t < peak_at:
        return cfg.lr * (t + 1) / peak_at
    frac = (t - peak_at) / max(cfg.total_iters - peak_at, 1)
    return cfg.lr * max(1.0 - frac, 0.02)


def _evaluate_run(
    model: ToyClassifier,
    test: SyntheticDataset,
    unlabeled: SyntheticDataset,
    state: ThresholdState,
    iteration: int,
) -> EvalReport:
    # Evaluation is rng-free: raw features only, so it cannot perturb training.
    test_scores = model.forward(test.features)
    unl_scores = model.forward(unlabeled.features)
    mask = select(unl_scores, state.tau_plus, state.tau_minus)
    quality = pseudo_label_quality(mask, unlabeled.labels)
    return evaluate(test_scores, test.labels, iteration, pseudo=quality)


def run_experiment(cfg: ExperimentConfig, out_path) -> tuple[EvalReport, Path]:
    """Train one configuration end to end, streaming the trace to ``out_path``.

    Per iteration: score thresholds are derived from the histogram state left
    by the previous iteration, the unlabeled weights follow from the resulting
    gaps, pseudo-labels and masks are built from the weak view, and only then
    are the histograms updated with the current batch's weak scores -- so
    thresholds never see the batch they gate.
    """
    cfg.validate()
    out_path = Path(out_path)
    labeled, unlabeled, test = dataset_from_config(cfg)
    _, train_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    rng = np.random.default_rng(train_seed)

    model = ToyClassifier.create(
        rng, cfg.n_features, cfg.n_classes, cfg.hidden_dim, cfg.init_scale
    )
    optimizer = Adam(lr=cfg.lr)
    schedule = WeightSchedule(
        cfg.start_gap, cfg.saturate_gap, cfg.saturate_weight, cfg.warmup_iters
    )
    loss_cfg = cfg.loss_config()
    policy = AugmentationPolicy(cfg.weak_noise, cfg.strong_noise, cfg.strong_dropout)
    histograms = [ClassHistogram.uniform(cfg.n_bins, cfg.decay) for _ in range(cfg.n_classes)]
    if cfg.method == "fixmatch-fixed":
        state = fixed_thresholds(cfg.fixed_tau_plus, cfg.fixed_tau_minus, cfg.n_classes)
    else:
        state = init_class_percentiles(
            cfg.kappa_plus, cfg.kappa_minus, labeled.labels, cfg.clamp_kappa_minus
        )

    n_unl_batch = cfg.mu * cfg.batch_size
    report: EvalReport | None = None
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            _json_line(
                {
                    "record": "header",
                    "version": 1,
                    "config": cfg.to_dict(),
                    "fields": TRACE_FIELDS,
                    "ap_definition": AP_DEFINITION,
                }
            )
        )
        for t in range(cfg.total_iters):
            if cfg.method != "fixmatch-fixed":
                refresh_thresholds(state, histograms)
            gap = state.gap
            alpha = np.asarray(loss_weight(gap, t, schedule), dtype=float)
            if cfg.method == "supervised-only":
                alpha = np.zeros(cfg.n_classes)
            elif cfg.scalar_alpha:
                alpha = np.full(cfg.n_classes, float(alpha.mean()))

            lab_idx = rng.choice(labeled.n_samples, size=cfg.batch_size, replace=False)
            unl_idx = rng.choice(unlabeled.n_samples, size=n_unl_batch, replace=False)
            x_lab = augment(labeled.features[lab_idx], policy, "weak", rng)
            y_lab = labeled.labels[lab_idx]
            x_unl = unlabeled.features[unl_idx]
            x_weak = augment(x_unl, policy, "weak", rng)
            x_strong = augment(x_unl, policy, "strong", rng)

            scores_lab, cache_lab = model.forward_cached(x_lab)
            weak_scores = model.forward(x_weak)  # pseudo-label source; no gradient
            strong_scores, cache_unl = model.forward_cached(x_strong)

            mask = select(weak_scores, state.tau_plus, state.tau_minus)
            if cfg.method != "fixmatch-fixed":
                for c in range(cfg.n_classes):
                    histograms[c].update(weak_scores[:, c], batch_size=n_unl_batch)

            loss_sup = supervised_loss(y_lab, scores_lab, loss_cfg)
            per_class_unl = unlabeled_loss_per_class(mask, strong_scores, loss_cfg)
            loss_unl = float(per_class_unl.sum())
            weighted_unl = float(alpha @ per_class_unl)
            loss_tot = total_loss(loss_sup, weighted_unl, 1.0)
            if not np.isfinite(loss_tot):
                raise TrainingDiverged(t, loss_sup, loss_unl)

            grads = model.backward(cache_lab, supervised_grad(y_lab, scores_lab, loss_cfg))
            if np.any(alpha > 0.0):
                grads_unl = model.backward(
                    cache_unl, unlabeled_grad(mask, strong_scores, loss_cfg, class_weights=alpha)
                )
                for key in grads:
                    grads[key] = grads[key] + grads_unl[key]
            optimizer.lr = _lr_at(cfg, t)
            optimizer.step(model.params, grads)

            fh.write(
                _json_line(
                    {
                        "record": "iteration",
                        "t": t,
                        "tau_plus": _floats(state.tau_plus),
                        "tau_minus": _floats(state.tau_minus),
                        "gap": _floats(gap),
                        "alpha": _floats(alpha),
                        "sel_pos": _ints(mask.positive_counts),
                        "sel_neg": _ints(mask.negative_counts),
                        "loss_sup": loss_sup,
                        "loss_unl": loss_unl,
                        "loss_total": loss_tot,
                    }
                )
            )
            if (t + 1) % cfg.eval_every == 0 or t == cfg.total_iters - 1:
                report = _evaluate_run(model, test, unlabeled, state, t)
                fh.write(_json_line(report.to_dict()))
    assert report is not None
    return report, out_path


def read_trace(path) -> tuple[dict, list[dict], list[dict]]:
    """Parse a trace file into (header, iteration records, eval records)."""
    header: dict | None = None
    iterations: list[dict] = []
    evals: list[dict] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            kind = record.get("record")
            if kind == "header":
                header = record
            elif kind == "iteration":
                iterations.append(record)
            elif kind == "eval":
                evals.append(record)
            else:
                raise ValueError(f"{path}: unknown record type {kind!r}")
    if header is None:
        raise ValueError(f"{path}: missing header record")
    if not evals:
        raise ValueError(f"{path}: no evaluation records")
    return header, iterations, evals


def compare_runs(trace_paths) -> dict:
    """Tabulate final metrics across runs that share a dataset.

    All traces must come from identical datasets (same seed and dataset
    parameters) when a single method is compared against itself, or from an
    identical *set* of seeds per method when several methods are compared;
    anything else is refused so apples never meet oranges.
    """
    trace_paths = [Path(p) for p in trace_paths]
    if len(trace_paths) < 2:
        raise ValueError("need at least two traces to compare")
    runs = []
    for path in trace_paths:
        header, _, evals = read_trace(path)
        config = header["config"]
        final = evals[-1]
        runs.append(
            {
                "path": str(path),
                "method": config["method"],
                "seed": config["seed"],
                "dataset": {k: config[k] for k in ExperimentConfig.DATASET_FIELDS if k != "seed"},
                "final_map": final["mean_ap"],
                "final_auc": final["macro_auc"],
            }
        )
    base = runs[0]["dataset"]
    for run in runs[1:]:
        if run["dataset"] != base:
            raise ValueError(
                f"dataset parameters differ between {runs[0]['path']} and {run['path']}"
            )
    by_method: dict[str, dict[int, list[dict]]] = {}
    for run in runs:
        by_method.setdefault(run["method"], {}).setdefault(run["seed"], []).append(run)
    seed_sets = {m: sorted(seeds) for m, seeds in by_method.items()}
    if len(by_method) == 1:
        (seeds,) = seed_sets.values()
        if len(set(seeds)) != 1:
            raise ValueError(
                f"mismatched dataset seeds for a single-method comparison: {sorted(set(seeds))}"
            )
    else:
        reference = next(iter(seed_sets.values()))
        if any(sorted(set(s)) != sorted(set(reference)) for s in seed_sets.values()):
            raise ValueError(f"mismatched dataset seeds across methods: {seed_sets}")

    summary: dict = {"methods": {}, "deltas": []}
    for method, by_seed in sorted(by_method.items()):
        maps = {seed: float(np.mean([r["final_map"] for r in rs])) for seed, rs in by_seed.items()}
        aucs = {seed: float(np.mean([r["final_auc"] for r in rs])) for seed, rs in by_seed.items()}
        summary["methods"][method] = {
            "seeds": sorted(maps),
            "map_by_seed": {str(s): maps[s] for s in sorted(maps)},
            "auc_by_seed": {str(s): aucs[s] for s in sorted(aucs)},
            "mean_map": float(np.mean(list(maps.values()))),
            "mean_auc": float(np.mean(list(aucs.values()))),
        }
    methods = sorted(by_method)
    for i, a in enumerate(methods):
        for b in methods[i + 1 :]:
            shared = sorted(set(by_method[a]) & set(by_method[b]))
            per_seed = {
                str(s): summary["methods"][a]["map_by_seed"][str(s)]
                - summary["methods"][b]["map_by_seed"][str(s)]
                for s in shared
            }
            summary["deltas"].append(
                {
                    "first": a,
                    "second": b,
                    "map_delta_by_seed": per_seed,
                    "mean_map_delta": float(np.mean(list(per_seed.values()))),
                    "wins": int(sum(d >= 0 for d in per_seed.values())),
                    "seeds": shared,
                }
            )
    if len(runs) == 2:
        summary["pairwise_map_delta"] = float(runs[1]["final_map"] - runs[0]["final_map"])
    return summary


def format_comparison(summary: dict) -> str:
    lines = []
    lines.append(f"{'method':<18} {'mean mAP':>9} {'mean AUC':>9}  per-seed mAP")
    for method, stats in summary["methods"].items():
        per_seed = " ".join(
            f"{stats['map_by_seed'][str(s)]:.4f}" for s in stats["seeds"]
        )
        lines.append(
            f"{method:<18} {stats['mean_map']:>9.4f} {stats['mean_auc']:>9.4f}  {per_seed}"
        )
    for delta in summary["deltas"]:
        lines.append(
            f"{delta['first']} - {delta['second']}: mean mAP delta "
            f"{delta['mean_map_delta']:+.4f} "
            f"({delta['wins']}/{len(delta['seeds'])} seeds >= 0)"
        )
    if "pairwise_map_delta" in summary:
        lines.append(f"pairwise mAP delta (second - first): {summary['pairwise_map_delta']:+.6f}")
    return "\n".join(lines)
