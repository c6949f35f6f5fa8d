"""Ranking metrics for multi-label evaluation and pseudo-label quality accounting.

Average precision is the raw descending-score sweep (no interpolation): the
mean of precision-at-rank over the ranks holding positives. ROC-AUC is the
rank statistic -- the probability that a random positive outscores a random
negative, ties counted half -- which makes it invariant to any strictly
monotone rescaling of the scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .pseudolabel import SelectionMask

AP_DEFINITION = "non-interpolated descending-score sweep"


def average_precision(scores, labels) -> float:
    """Average precision of one class's ranking. Requires at least one positive."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise ValueError("average precision is undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = (labels[order] == 1).astype(float)
    precision_at = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float((precision_at * hits).sum() / n_pos)


def roc_auc(scores, labels) -> float:
    """Rank-statistic ROC-AUC. Requires both a positive and a negative."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC is undefined with a single-polarity label set")
    ranks = rankdata(scores)  # average ranks, so ties count half
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pseudo_label_quality(mask: SelectionMask, true_labels) -> dict[str, np.ndarray]:
    """Per-class precision/recall of the selected pseudo-labels, split by polarity.

    Precision is NaN (absent) for a class that selected nothing of that
    polarity; recall is NaN when the split holds no ground-truth instance of
    that polarity. Counts of selected entries are included alongside.
    """
    true_labels = np.asarray(true_labels)
    if true_labels.shape != mask.selected.shape:
        raise ValueError(
            f"shape mismatch: labels {true_labels.shape} vs mask {mask.selected.shape}"
        )
    sel_pos = mask.selected & (mask.pseudo == 1.0)
    sel_neg = mask.selected & (mask.pseudo == 0.0)
    correct_pos = (sel_pos & (true_labels == 1)).sum(axis=0).astype(float)
    correct_neg = (sel_neg & (true_labels == 0)).sum(axis=0).astype(float)
    n_sel_pos = sel_pos.sum(axis=0).astype(float)
    n_sel_neg = sel_neg.sum(axis=0).astype(float)
    n_true_pos = (true_labels == 1).sum(axis=0).astype(float)
    n_true_neg = (true_labels == 0).sum(axis=0).astype(float)

    def ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
        out = np.full(num.shape, np.nan)
        np.divide(num, den, out=out, where=den > 0)
        return out

    return {
        "pos_precision": ratio(correct_pos, n_sel_pos),
        "pos_recall": ratio(correct_pos, n_true_pos),
        "neg_precision": ratio(correct_neg, n_sel_neg),
        "neg_recall": ratio(correct_neg, n_true_neg),
        "pos_selected": n_sel_pos,
        "neg_selected": n_sel_neg,
    }


def _nan_to_none(values) -> list:
    return [None if (v is None or np.isnan(v)) else float(v) for v in values]


@dataclass
class EvalReport:
    """Snapshot of test-set ranking quality, with per-class detail.

    Classes without positives are skipped for AP; classes missing either
    polarity are skipped for AUC. Skipped classes are excluded from the macro
    means and enumerated so they are visible rather than silently absorbed.
    """

    iteration: int
    per_class_ap: list
    mean_ap: float | None
    per_class_auc: list
    macro_auc: float | None
    skipped_ap: list[int] = field(default_factory=list)
    skipped_auc: list[int] = field(default_factory=list)
    pseudo: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "record": "eval",
            "t": self.iteration,
            "per_class_ap": _nan_to_none(self.per_class_ap),
            "mean_ap": self.mean_ap,
            "per_class_auc": _nan_to_none(self.per_class_auc),
            "macro_auc": self.macro_auc,
            "skipped_ap": list(self.skipped_ap),
            "skipped_auc": list(self.skipped_auc),
        }
        if self.pseudo is not None:
            out["pseudo"] = {k: _nan_to_none(v) for k, v in self.pseudo.items()}
        return out


def evaluate(scores, labels, iteration: int, pseudo: dict | None = None) -> EvalReport:
    """Per-class AP and AUC over a test split, plus their macro means."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"shape mismatch: scores {scores.shape} vs labels {labels.shape}")
    n_classes = labels.shape[1]
    ap: list = []
    auc: list = []
    skipped_ap: list[int] = []
    skipped_auc: list[int] = []
    for c in range(n_classes):
        try:
            ap.append(average_precision(scores[:, c], labels[:, c]))
        except ValueError:
            ap.append(None)
            skipped_ap.append(c)
        try:
            auc.append(roc_auc(scores[:, c], labels[:, c]))
        except ValueError:
            auc.append(None)
            skipped_auc.append(c)
    ap_values = [v for v in ap if v is not None]
    auc_values = [v for v in auc if v is not None]
    return EvalReport(
        iteration=iteration,
        per_class_ap=ap,
        mean_ap=float(np.mean(ap_values)) if ap_values else None,
        per_class_auc=auc,
        macro_auc=float(np.mean(auc_values)) if auc_values else None,
        skipped_ap=skipped_ap,
        skipped_auc=skipped_auc,
        pseudo=pseudo,
    )
