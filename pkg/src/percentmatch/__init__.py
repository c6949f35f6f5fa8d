"""Percentile-based dynamic thresholding for multi-label semi-supervised learning."""

from .histogram import ClassHistogram
from .losses import (
    LossConfig,
    elementwise_grad,
    elementwise_loss,
    supervised_grad,
    supervised_loss,
    total_loss,
    unlabeled_grad,
    unlabeled_loss,
    unlabeled_loss_per_class,
)
from .metrics import EvalReport, average_precision, evaluate, pseudo_label_quality, roc_auc
from .model import Adam, ToyClassifier
from .pseudolabel import SelectionMask, select
from .synthetic import (
    AugmentationPolicy,
    SyntheticDataset,
    augment,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from .thresholds import (
    ThresholdState,
    WeightSchedule,
    fixed_thresholds,
    init_class_percentiles,
    loss_weight,
    refresh_thresholds,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    TrainingDiverged,
    compare_runs,
    dataset_from_config,
    read_trace,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AugmentationPolicy",
    "ClassHistogram",
    "ConfigError",
    "EvalReport",
    "ExperimentConfig",
    "LossConfig",
    "SelectionMask",
    "SyntheticDataset",
    "ThresholdState",
    "ToyClassifier",
    "TrainingDiverged",
    "WeightSchedule",
    "augment",
    "average_precision",
    "compare_runs",
    "dataset_from_config",
    "elementwise_grad",
    "elementwise_loss",
    "evaluate",
    "fixed_thresholds",
    "generate_dataset",
    "init_class_percentiles",
    "load_dataset",
    "loss_weight",
    "pseudo_label_quality",
    "read_trace",
    "refresh_thresholds",
    "roc_auc",
    "run_experiment",
    "save_dataset",
    "select",
    "supervised_grad",
    "supervised_loss",
    "total_loss",
    "unlabeled_grad",
    "unlabeled_loss",
    "unlabeled_loss_per_class",
]
