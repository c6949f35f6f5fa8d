"""Per-class percentile targets, derived score thresholds, and the gap-driven loss weight."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .histogram import ClassHistogram


@dataclass
class WeightSchedule:
    """Maps a class's threshold gap and the iteration count to its unlabeled loss weight.

    The weight is 0 during warmup and while the gap sits below ``start_gap``,
    saturates at ``saturate_weight`` once the gap exceeds ``saturate_gap``, and
    ramps linearly in between. The ramp evaluates to 0 at ``start_gap`` and to
    ``saturate_weight`` at ``saturate_gap``, so the schedule is continuous.
    """

    start_gap: float = 0.5
    saturate_gap: float = 0.55
    saturate_weight: float = 1.0
    warmup_iters: int = 300

    def __post_init__(self) -> None:
        if not self.start_gap < self.saturate_gap:
            raise ValueError(
                f"start_gap must be < saturate_gap, got {self.start_gap} >= {self.saturate_gap}"
            )
        if self.saturate_weight <= 0.0:
            raise ValueError("saturate_weight must be positive")
        if self.warmup_iters < 0:
            raise ValueError("warmup_iters must be >= 0")


@dataclass
class ThresholdState:
    """Per-class percentile targets and the score thresholds derived from them."""

    kappa_plus: np.ndarray
    kappa_minus: np.ndarray
    tau_plus: np.ndarray = field(default=None)  # type: ignore[assignment]
    tau_minus: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.kappa_plus = np.asarray(self.kappa_plus, dtype=float)
        self.kappa_minus = np.asarray(self.kappa_minus, dtype=float)
        if self.kappa_plus.shape != self.kappa_minus.shape or self.kappa_plus.ndim != 1:
            raise ValueError("percentile targets must be 1-D arrays of equal length")
        bad = np.flatnonzero(
            (self.kappa_minus < 0.0)
            | (self.kappa_plus > 1.0)
            | (self.kappa_minus >= self.kappa_plus)
        )
        if bad.size:
            detail = ", ".join(
                f"class {c}: kappa_minus={self.kappa_minus[c]:.6g} "
                f"kappa_plus={self.kappa_plus[c]:.6g}"
                for c in bad
            )
            raise ValueError(f"need 0 <= kappa_minus < kappa_plus <= 1 per class; {detail}")
        if self.tau_plus is None:
            self.tau_plus = self.kappa_plus.copy()
        if self.tau_minus is None:
            self.tau_minus = self.kappa_minus.copy()
        self.tau_plus = np.asarray(self.tau_plus, dtype=float)
        self.tau_minus = np.asarray(self.tau_minus, dtype=float)

    @property
    def n_classes(self) -> int:
        return int(self.kappa_plus.size)

    @property
    def gap(self) -> np.ndarray:
        return self.tau_plus - self.tau_minus


def init_class_percentiles(
    kappa_plus: float,
    kappa_minus: float,
    labels,
    clamp_minus: bool = True,
) -> ThresholdState:
    """Seed per-class percentile targets from global targets and labeled-data ratios.

    For each class the fraction of negatives in the labeled set can override
    the global targets: the positive percentile is raised to at least that
    ratio (so a near-ubiquitously-negative class never hands out positive
    pseudo-labels too freely) and, symmetrically, the negative percentile is
    lowered to at most that ratio. ``clamp_minus=False`` disables the second
    clamp, which only ever binds for classes present in almost every sample.

    Initial score thresholds equal the percentile targets, since the uniform
    starting histograms have an identity CDF.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.shape[0] == 0:
        raise ValueError("labeled set must be a non-empty (N, C) binary matrix")
    if not 0.0 <= kappa_minus < kappa_plus <= 1.0:
        raise ValueError(
            f"need 0 <= kappa_minus < kappa_plus <= 1, got {kappa_minus}, {kappa_plus}"
        )
    neg_ratio = (labels == 0).mean(axis=0)
    kp = np.maximum(kappa_plus, neg_ratio)
    if clamp_minus:
        km = np.minimum(kappa_minus, neg_ratio)
    else:
        km = np.full(labels.shape[1], float(kappa_minus))
    return ThresholdState(kappa_plus=kp, kappa_minus=km)


def fixed_thresholds(tau_plus: float, tau_minus: float, n_classes: int) -> ThresholdState:
    """Constant score thresholds for every class (the fixed-threshold baseline)."""
    if not 0.0 <= tau_minus <= tau_plus <= 1.0:
        raise ValueError(f"need 0 <= tau_minus <= tau_plus <= 1, got {tau_minus}, {tau_plus}")
    return ThresholdState(
        kappa_plus=np.ones(n_classes),
        kappa_minus=np.zeros(n_classes),
        tau_plus=np.full(n_classes, float(tau_plus)),
        tau_minus=np.full(n_classes, float(tau_minus)),
    )


def refresh_thresholds(state: ThresholdState, histograms: list[ClassHistogram]) -> None:
    """Recompute every class's score thresholds from its current histogram."""
    if len(histograms) != state.n_classes:
        raise ValueError(
            f"got {len(histograms)} histograms for {state.n_classes} classes"
        )
    for c, hist in enumerate(histograms):
        state.tau_plus[c] = hist.quantile(state.kappa_plus[c])
        state.tau_minus[c] = hist.quantile(state.kappa_minus[c])


def loss_weight(gap, t: int, schedule: WeightSchedule):
    """Unlabeled loss weight for a threshold gap at iteration ``t``.

    Vectorized over ``gap``; a scalar gap returns a plain float.
    """
    gap_arr = np.asarray(gap, dtype=float)
    if t < schedule.warmup_iters:
        out = np.zeros_like(gap_arr)
    else:
        ramp = schedule.saturate_weight * (gap_arr - schedule.start_gap) / (
            schedule.saturate_gap - schedule.start_gap
        )
        out = np.where(
            gap_arr < schedule.start_gap,
            0.0,
            np.where(gap_arr > schedule.saturate_gap, schedule.saturate_weight, ramp),
        )
    if np.isscalar(gap) or getattr(gap, "ndim", 0) == 0:
        return float(out)
    return out
