"""Synthetic imbalanced multi-label data and feature-space augmentations.

Samples carry independent per-class labels with log-spaced priors, and their
features are the sum of the active classes' prototype vectors plus isotropic
noise. Augmentation happens in feature space: the weak view adds light
Gaussian noise, the strong view adds heavier noise and drops features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SyntheticDataset:
    """One split of a generated dataset.

    Labels are kept on every split, including the unlabeled one: the training
    loop never reads them there, but pseudo-label quality accounting does.
    """

    features: np.ndarray
    labels: np.ndarray
    class_priors: np.ndarray
    imbalance_ratio: float

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        self.class_priors = np.asarray(self.class_priors, dtype=float)
        if self.features.ndim != 2 or self.labels.ndim != 2:
            raise ValueError("features and labels must be 2-D")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels row counts differ")
        if self.labels.shape[1] != self.class_priors.size:
            raise ValueError("labels column count must match class_priors")
        if np.any(self.class_priors <= 0.0) or np.any(self.class_priors >= 1.0):
            raise ValueError("class priors must lie in (0, 1)")
        if self.imbalance_ratio < 1.0:
            raise ValueError("imbalance_ratio must be >= 1")

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_classes(self) -> int:
        return int(self.labels.shape[1])


@dataclass
class AugmentationPolicy:
    """Noise scales for the weak and strong views.

    Weak adds Gaussian noise with scale ``weak_noise``; strong adds noise with
    the larger scale ``strong_noise`` and then zeroes each feature
    independently with probability ``strong_dropout``.
    """

    weak_noise: float = 0.1
    strong_noise: float = 0.5
    strong_dropout: float = 0.2

    def __post_init__(self) -> None:
        if self.weak_noise < 0.0 or not self.weak_noise < self.strong_noise:
            raise ValueError("need 0 <= weak_noise < strong_noise")
        if not 0.0 <= self.strong_dropout < 1.0:
            raise ValueError("strong_dropout must lie in [0, 1)")


def generate_dataset(
    seed,
    n_samples: int,
    n_classes: int,
    n_features: int,
    imbalance_ratio: float,
    label_fraction: float,
    *,
    p_max: float = 0.5,
    test_fraction: float = 0.2,
    proto_scale: float = 3.0,
    proto_rank: int = 0,
    noise_scale: float = 1.0,
) -> tuple[SyntheticDataset, SyntheticDataset, SyntheticDataset]:
    """Draw (labeled, unlabeled, test) splits from one synthetic problem.

    Class priors are log-spaced from ``p_max`` down to
    ``p_max / imbalance_ratio``. Prototype vectors are isotropic by default;
    with ``proto_rank > 0`` they are confined to a shared random subspace of
    that dimension, so most feature directions carry only noise -- a model
    fit on few labels picks up weight in those nuisance directions, which is
    what consistency training over the unlabeled pool can prune away.

    The ``n_samples`` training rows are split into the first
    ``round(label_fraction * n_samples)`` labeled rows and the rest unlabeled;
    the test split is drawn separately from the same generative process, so
    all three splits are disjoint. The same seed reproduces the same arrays
    bit for bit.
    """
    if n_samples < 1 or n_classes < 1 or n_features < 1:
        raise ValueError("n_samples, n_classes, n_features must be positive")
    if not 0.0 < label_fraction < 1.0:
        raise ValueError(f"label_fraction must lie in (0, 1), got {label_fraction}")
    if imbalance_ratio < 1.0:
        raise ValueError(f"imbalance_ratio must be >= 1, got {imbalance_ratio}")
    if not 0.0 < p_max < 1.0:
        raise ValueError(f"p_max must lie in (0, 1) for feasible priors, got {p_max}")
    if test_fraction <= 0.0:
        raise ValueError("test_fraction must be positive")
    if proto_rank < 0 or proto_rank > n_features:
        raise ValueError(f"proto_rank must lie in [0, n_features], got {proto_rank}")
    n_labeled = int(round(label_fraction * n_samples))
    if n_labeled < 1 or n_labeled >= n_samples:
        raise ValueError(
            f"label_fraction {label_fraction} leaves no usable split of {n_samples} samples"
        )
    n_test = max(int(round(test_fraction * n_samples)), 1)

    rng = np.random.default_rng(seed)
    priors = np.geomspace(p_max, p_max / imbalance_ratio, n_classes)
    if proto_rank > 0:
        basis, _ = np.linalg.qr(rng.normal(size=(n_features, proto_rank)))
        coeffs = rng.normal(size=(n_classes, proto_rank))
        prototypes = coeffs @ basis.T * (proto_scale / np.sqrt(proto_rank))
    else:
        prototypes = rng.normal(size=(n_classes, n_features)) * (proto_scale / np.sqrt(n_features))

    total = n_samples + n_test
    labels = (rng.random((total, n_classes)) < priors).astype(np.int8)
    features = labels @ prototypes + rng.normal(0.0, noise_scale, size=(total, n_features))

    def split(lo: int, hi: int) -> SyntheticDataset:
        return SyntheticDataset(
            features=features[lo:hi],
            labels=labels[lo:hi],
            class_priors=priors,
            imbalance_ratio=float(imbalance_ratio),
        )

    return split(0, n_labeled), split(n_labeled, n_samples), split(n_samples, total)


def augment(x, policy: AugmentationPolicy, strength: str, rng: np.random.Generator) -> np.ndarray:
    """Perturb a feature batch with the weak or strong view of ``policy``."""
    x = np.asarray(x, dtype=float)
    if strength == "weak":
        return x + rng.normal(0.0, 1.0, size=x.shape) * policy.weak_noise
    if strength == "strong":
        out = x + rng.normal(0.0, 1.0, size=x.shape) * policy.strong_noise
        keep = rng.random(size=x.shape) >= policy.strong_dropout
        return out * keep
    raise ValueError(f"strength must be 'weak' or 'strong', got {strength!r}")


def save_dataset(dataset: SyntheticDataset, path) -> None:
    """Write a split as self-describing text: a header line with the dimensions,
    a priors line, then one sample per line (features followed by label bits)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"percentmatch-data n_samples={dataset.n_samples} "
            f"n_features={dataset.n_features} n_classes={dataset.n_classes} "
            f"imbalance_ratio={float(dataset.imbalance_ratio)!r}\n"
        )
        fh.write("class_priors " + " ".join(repr(float(p)) for p in dataset.class_priors) + "\n")
        for feats, labs in zip(dataset.features, dataset.labels):
            row = [repr(float(v)) for v in feats] + [str(int(v)) for v in labs]
            fh.write(" ".join(row) + "\n")


def load_dataset(path) -> SyntheticDataset:
    """Read a split written by ``save_dataset``; values round-trip exactly."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if not header or header[0] != "percentmatch-data":
            raise ValueError(f"{path}: not a dataset dump (bad header)")
        meta = dict(item.split("=", 1) for item in header[1:])
        n_samples = int(meta["n_samples"])
        n_features = int(meta["n_features"])
        n_classes = int(meta["n_classes"])
        ratio = float(meta["imbalance_ratio"])
        priors_line = fh.readline().split()
        if not priors_line or priors_line[0] != "class_priors":
            raise ValueError(f"{path}: missing class_priors line")
        priors = np.array([float(v) for v in priors_line[1:]])
        features = np.empty((n_samples, n_features))
        labels = np.empty((n_samples, n_classes), dtype=np.int8)
        for i in range(n_samples):
            parts = fh.readline().split()
            if len(parts) != n_features + n_classes:
                raise ValueError(f"{path}: sample line {i} has {len(parts)} fields")
            features[i] = [float(v) for v in parts[:n_features]]
            labels[i] = [int(v) for v in parts[n_features:]]
    return SyntheticDataset(
        features=features, labels=labels, class_priors=priors, imbalance_ratio=ratio
    )
