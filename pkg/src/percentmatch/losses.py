"""Classification losses with analytic score gradients.

Provides the elementwise loss (binary cross-entropy or asymmetric focal
variant), the batch-mean supervised loss, the mask-gated unlabeled loss, and
the weighted total objective. Every loss has a matching gradient with respect
to the model scores so the toy training loop can backpropagate by hand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pseudolabel import SelectionMask

# Scores are clamped to this range before any logarithm.
SCORE_EPS = 1e-7

_KIND_ALIASES = {
    "bce": "bce",
    "binary-cross-entropy": "bce",
    "asymmetric": "asymmetric",
}


@dataclass
class LossConfig:
    """Loss selection plus the asymmetric-variant parameters.

    The asymmetric loss down-weights easy entries with focusing exponents
    (``gamma_pos`` for positives, ``gamma_neg`` for negatives) and shifts the
    negative-side probability by ``clip`` before the log. With both exponents
    and the shift at 0 it reduces exactly to binary cross-entropy, which is
    also the default kind; no asymmetric parameters are baked in because none
    are universally agreed on.

    ``batch_size`` and ``mu`` declare the expected labeled batch size and the
    unlabeled-to-labeled ratio; when set they are checked against the arrays
    actually passed in. Normalization always uses the actual row count.
    """

    kind: str = "bce"
    gamma_pos: float = 0.0
    gamma_neg: float = 0.0
    clip: float = 0.0
    batch_size: int | None = None
    mu: int | None = None
    per_selected_norm: bool = False

    def __post_init__(self) -> None:
        try:
            self.kind = _KIND_ALIASES[self.kind]
        except KeyError:
            raise ValueError(
                f"unknown loss kind {self.kind!r}; expected one of {sorted(set(_KIND_ALIASES))}"
            ) from None
        if self.gamma_pos < 0.0 or self.gamma_neg < 0.0:
            raise ValueError("focusing exponents must be >= 0")
        if not 0.0 <= self.clip < 1.0:
            raise ValueError("probability shift must lie in [0, 1)")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mu is not None and self.mu < 1:
            raise ValueError("mu must be >= 1")


def _check_scores(score) -> np.ndarray:
    score = np.asarray(score, dtype=float)
    if np.any(np.isnan(score)):
        raise ValueError("scores contain NaN")
    return score


def elementwise_loss(target, score, cfg: LossConfig) -> np.ndarray:
    """Per-entry loss; broadcasts over arrays. Scores are clamped away from {0, 1}."""
    target = np.asarray(target, dtype=float)
    score = _check_scores(score)
    p = np.clip(score, SCORE_EPS, 1.0 - SCORE_EPS)
    if cfg.kind == "bce":
        return -(target * np.log(p) + (1.0 - target) * np.log1p(-p))
    # Asymmetric: focal weights per polarity, probability shift on the negative side.
    w_pos = np.power(1.0 - p, cfg.gamma_pos)
    q = np.minimum(1.0 - p + cfg.clip, 1.0)
    w_neg = np.power(np.maximum(p - cfg.clip, 0.0), cfg.gamma_neg)
    loss_pos = -w_pos * np.log(p)
    loss_neg = -w_neg * np.log(q)
    return target * loss_pos + (1.0 - target) * loss_neg


def elementwise_grad(target, score, cfg: LossConfig) -> np.ndarray:
    """d(elementwise_loss)/d(score); zero wherever the clamp is active."""
    target = np.asarray(target, dtype=float)
    score = _check_scores(score)
    inside = (score > SCORE_EPS) & (score < 1.0 - SCORE_EPS)
    p = np.clip(score, SCORE_EPS, 1.0 - SCORE_EPS)
    if cfg.kind == "bce":
        grad = -target / p + (1.0 - target) / (1.0 - p)
        return grad * inside
    # Positive branch: d/dp [-(1-p)^g log p].
    w_pos = np.power(1.0 - p, cfg.gamma_pos)
    grad_pos = -w_pos / p
    if cfg.gamma_pos > 0.0:
        grad_pos = grad_pos + cfg.gamma_pos * np.power(1.0 - p, cfg.gamma_pos - 1.0) * np.log(p)
    # Negative branch: d/dp [-w^h log q] with w = max(p - clip, 0), q = min(1 - p + clip, 1).
    # Flat (zero gradient) below the shift point where w = 0 and q = 1.
    active = p > cfg.clip
    w = np.maximum(p - cfg.clip, 0.0)
    q = np.minimum(1.0 - p + cfg.clip, 1.0)
    w_neg = np.power(w, cfg.gamma_neg)
    grad_neg = np.where(active, w_neg / q, 0.0)
    if cfg.gamma_neg > 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            focal_term = cfg.gamma_neg * np.power(w, cfg.gamma_neg - 1.0) * np.log(q)
        grad_neg = grad_neg - np.where(active, focal_term, 0.0)
    grad = target * grad_pos + (1.0 - target) * grad_neg
    return grad * inside


def supervised_loss(labels, scores, cfg: LossConfig) -> float:
    """Batch-mean supervised loss: per-sample class sums averaged over the batch."""
    labels = np.asarray(labels, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValueError(f"shape mismatch: labels {labels.shape} vs scores {scores.shape}")
    if cfg.batch_size is not None and labels.shape[0] != cfg.batch_size:
        raise ValueError(
            f"expected labeled batch of {cfg.batch_size} rows, got {labels.shape[0]}"
        )
    return float(elementwise_loss(labels, scores, cfg).sum() / labels.shape[0])


def supervised_grad(labels, scores, cfg: LossConfig) -> np.ndarray:
    """Gradient of ``supervised_loss`` with respect to the scores."""
    labels = np.asarray(labels, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValueError(f"shape mismatch: labels {labels.shape} vs scores {scores.shape}")
    return elementwise_grad(labels, scores, cfg) / labels.shape[0]


def _unlabeled_norm(mask: SelectionMask, cfg: LossConfig) -> float:
    if cfg.per_selected_norm:
        return float(max(int(mask.selected.sum()), 1))
    return float(mask.selected.shape[0])


def unlabeled_loss_per_class(mask: SelectionMask, strong_scores, cfg: LossConfig) -> np.ndarray:
    """Per-class contributions to the masked unlabeled loss (they sum to the scalar loss)."""
    strong_scores = np.asarray(strong_scores, dtype=float)
    if mask.selected.shape != strong_scores.shape:
        raise ValueError(
            f"shape mismatch: mask {mask.selected.shape} vs scores {strong_scores.shape}"
        )
    gate = mask.selected.astype(float)
    per_entry = gate * elementwise_loss(mask.pseudo, strong_scores, cfg)
    return per_entry.sum(axis=0) / _unlabeled_norm(mask, cfg)


def unlabeled_loss(mask: SelectionMask, strong_scores, cfg: LossConfig, class_weights=None) -> float:
    """Masked unlabeled loss over strong-view scores.

    Unselected entries contribute exactly 0 and receive zero gradient. With
    ``class_weights`` (one weight per class) each class's contribution is
    scaled before summing, which is how per-class unlabeled loss weights are
    applied.
    """
    per_class = unlabeled_loss_per_class(mask, strong_scores, cfg)
    if class_weights is None:
        return float(per_class.sum())
    class_weights = np.asarray(class_weights, dtype=float)
    if class_weights.shape != per_class.shape:
        raise ValueError(
            f"class_weights shape {class_weights.shape} does not match {per_class.shape}"
        )
    return float(class_weights @ per_class)


def unlabeled_grad(mask: SelectionMask, strong_scores, cfg: LossConfig, class_weights=None) -> np.ndarray:
    """Gradient of ``unlabeled_loss`` with respect to the strong-view scores."""
    strong_scores = np.asarray(strong_scores, dtype=float)
    if mask.selected.shape != strong_scores.shape:
        raise ValueError(
            f"shape mismatch: mask {mask.selected.shape} vs scores {strong_scores.shape}"
        )
    gate = mask.selected.astype(float)
    if class_weights is not None:
        class_weights = np.asarray(class_weights, dtype=float)
        gate = gate * class_weights
    grad = gate * elementwise_grad(mask.pseudo, strong_scores, cfg)
    return grad / _unlabeled_norm(mask, cfg)


def total_loss(supervised: float, unlabeled: float, alpha: float) -> float:
    """Weighted total objective: supervised plus ``alpha`` times unlabeled."""
    return float(supervised + alpha * unlabeled)
