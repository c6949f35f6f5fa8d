"""Hard pseudo-labels and selection masks from weak-view confidence scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SelectionMask:
    """Which (sample, class) entries enter the unlabeled loss, and their targets.

    ``selected`` is True where the weak score cleared either threshold, i.e.
    strictly above the positive threshold or strictly below the negative one.
    ``pseudo`` holds the hard target (1 above the positive threshold, else 0);
    values at unselected entries are stored but must never reach a loss --
    masked multiplication in the loss layer guarantees that.
    """

    selected: np.ndarray
    pseudo: np.ndarray

    def __post_init__(self) -> None:
        self.selected = np.asarray(self.selected, dtype=bool)
        self.pseudo = np.asarray(self.pseudo, dtype=float)
        if self.selected.shape != self.pseudo.shape:
            raise ValueError("selected and pseudo must have the same shape")

    @property
    def positive_counts(self) -> np.ndarray:
        """Per-class number of selected positive pseudo-labels."""
        return (self.selected & (self.pseudo == 1.0)).sum(axis=0)

    @property
    def negative_counts(self) -> np.ndarray:
        """Per-class number of selected negative pseudo-labels."""
        return (self.selected & (self.pseudo == 0.0)).sum(axis=0)


def select(weak_scores, tau_plus, tau_minus) -> SelectionMask:
    """Build the selection mask for a batch of weak-view scores.

    An entry is selected iff its score is strictly above ``tau_plus`` (then
    pseudo-labeled 1) or strictly below ``tau_minus`` (then pseudo-labeled 0).
    Scores inside ``[tau_minus, tau_plus]``, including exact threshold hits,
    fall in the discarded region and are ignored.
    """
    scores = np.asarray(weak_scores, dtype=float)
    tau_plus = np.asarray(tau_plus, dtype=float)
    tau_minus = np.asarray(tau_minus, dtype=float)
    if np.any(np.isnan(scores)):
        raise ValueError("scores contain NaN")
    if np.any(scores < 0.0) or np.any(scores > 1.0):
        raise ValueError("scores must lie in [0, 1]")
    if np.any(tau_minus > tau_plus):
        bad = np.flatnonzero(np.atleast_1d(tau_minus > tau_plus))
        raise ValueError(f"tau_minus > tau_plus for classes {bad.tolist()}")
    above = scores > tau_plus
    below = scores < tau_minus
    return SelectionMask(selected=above | below, pseudo=above.astype(float))
