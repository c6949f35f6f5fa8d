"""Per-class EMA histograms of confidence scores and their percentile inversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _validate_scores(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size == 0:
        raise ValueError("empty score batch")
    if np.any(np.isnan(scores)):
        raise ValueError("scores contain NaN")
    if np.any(scores < 0.0) or np.any(scores > 1.0):
        raise ValueError("scores must lie in [0, 1]")
    return scores


def _bin_index(scores: np.ndarray, n_bins: int) -> np.ndarray:
    # Half-open bins [j/K, (j+1)/K); a score on an interior edge lands in the
    # higher bin, and 1.0 lands in the top bin.
    idx = (scores * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


@dataclass
class ClassHistogram:
    """EMA estimate of one class's score distribution over [0, 1].

    Mass lives in ``n_bins`` equal-width bins and always sums to 1. ``decay``
    is the EMA momentum: each update keeps ``decay`` of the old mass and mixes
    in ``1 - decay`` of the current mini-batch histogram. ``decay == 0`` is a
    freeze sentinel: updates become no-ops, so with the uniform initial state
    the percentile inversion stays the identity.
    """

    bins: np.ndarray
    decay: float

    def __post_init__(self) -> None:
        self.bins = np.asarray(self.bins, dtype=float)
        if self.bins.ndim != 1 or self.bins.size == 0:
            raise ValueError("bins must be a non-empty 1-D array")
        if np.any(self.bins < 0.0):
            raise ValueError("bin masses must be non-negative")
        if not 0.0 <= self.decay <= 1.0:
            raise ValueError(f"decay must be in [0, 1], got {self.decay}")

    @property
    def n_bins(self) -> int:
        return int(self.bins.size)

    @classmethod
    def uniform(cls, n_bins: int, decay: float) -> "ClassHistogram":
        """Fresh histogram with all mass spread evenly (the start-of-training state)."""
        if n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {n_bins}")
        return cls(bins=np.full(n_bins, 1.0 / n_bins), decay=decay)

    @classmethod
    def from_scores(cls, scores, n_bins: int, decay: float = 1.0) -> "ClassHistogram":
        """Plain normalized histogram of a raw score sample.

        This is the no-memory limit of a single EMA update; it exists so the
        quantile inversion can be checked directly against raw data.
        """
        if n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {n_bins}")
        scores = _validate_scores(scores)
        counts = np.bincount(_bin_index(scores, n_bins), minlength=n_bins)
        return cls(bins=counts / scores.size, decay=decay)

    def update(self, scores, batch_size: int | None = None) -> None:
        """Fold one mini-batch of scores into the EMA. No-op when frozen.

        ``batch_size``, when given, asserts the expected unlabeled batch size;
        the batch histogram is always normalized by the actual count.
        """
        scores = _validate_scores(scores)
        if batch_size is not None and scores.size != batch_size:
            raise ValueError(
                f"expected batch of {batch_size} scores, got {scores.size}"
            )
        if self.decay == 0.0:
            return
        counts = np.bincount(_bin_index(scores, self.n_bins), minlength=self.n_bins)
        self.bins = self.decay * self.bins + (1.0 - self.decay) * (counts / scores.size)

    # Cumulative-mass ties at bin edges are broken toward the earlier bin; the
    # slack absorbs float rounding in the cumulative sums, where an exact
    # rational tie can land one ulp on either side.
    _TIE_EPS = 1e-9

    def quantile(self, kappa: float) -> float:
        """Smallest score at which the histogram's CDF reaches ``kappa``.

        The CDF is piecewise linear: mass is spread evenly inside each bin, so
        the returned threshold moves smoothly as mass shifts between bins
        instead of snapping to bin edges.
        """
        if not 0.0 <= kappa <= 1.0:
            raise ValueError(f"kappa must be in [0, 1], got {kappa}")
        cum = np.cumsum(self.bins)
        total = cum[-1]
        target = kappa * total
        j = int(np.searchsorted(cum, target - self._TIE_EPS, side="left"))
        if j >= self.n_bins:
            j = self.n_bins - 1
        if j == self.n_bins - 1 and target >= total:
            return 1.0
        prev = cum[j - 1] if j > 0 else 0.0
        mass = self.bins[j]
        frac = (target - prev) / mass if mass > 0.0 else 0.0
        frac = min(max(frac, 0.0), 1.0)
        return (j + frac) / self.n_bins
