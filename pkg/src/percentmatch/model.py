"""Tiny multi-label sigmoid classifier with hand-rolled backprop, plus Adam."""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class ToyClassifier:
    """Linear (or one-hidden-layer tanh) classifier with per-class sigmoid outputs.

    Multi-label by construction: each class gets an independent sigmoid, so
    scores do not sum to 1 across classes.
    """

    def __init__(self, params: dict[str, np.ndarray]):
        keys = set(params)
        if keys == {"w", "b"}:
            self.hidden = False
        elif keys == {"w1", "b1", "w2", "b2"}:
            self.hidden = True
        else:
            raise ValueError(f"unrecognized parameter set {sorted(keys)}")
        self.params = {k: np.asarray(v, dtype=float) for k, v in params.items()}

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        n_features: int,
        n_classes: int,
        hidden_dim: int = 0,
        init_scale: float = 0.01,
    ) -> "ToyClassifier":
        if hidden_dim > 0:
            params = {
                "w1": rng.normal(0.0, init_scale, size=(n_features, hidden_dim)),
                "b1": np.zeros(hidden_dim),
                "w2": rng.normal(0.0, init_scale, size=(hidden_dim, n_classes)),
                "b2": np.zeros(n_classes),
            }
        else:
            params = {
                "w": rng.normal(0.0, init_scale, size=(n_features, n_classes)),
                "b": np.zeros(n_classes),
            }
        return cls(params)

    def forward(self, x) -> np.ndarray:
        scores, _ = self.forward_cached(x)
        return scores

    def forward_cached(self, x) -> tuple[np.ndarray, dict]:
        """Scores in (0, 1) plus the intermediates needed by ``backward``."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise ValueError("expected a 2-D feature batch")
        if self.hidden:
            if x.shape[1] != self.params["w1"].shape[0]:
                raise ValueError(
                    f"feature dim {x.shape[1]} does not match model ({self.params['w1'].shape[0]})"
                )
            h = np.tanh(x @ self.params["w1"] + self.params["b1"])
            scores = expit(h @ self.params["w2"] + self.params["b2"])
            return scores, {"x": x, "h": h, "scores": scores}
        if x.shape[1] != self.params["w"].shape[0]:
            raise ValueError(
                f"feature dim {x.shape[1]} does not match model ({self.params['w'].shape[0]})"
            )
        scores = expit(x @ self.params["w"] + self.params["b"])
        return scores, {"x": x, "scores": scores}

    def backward(self, cache: dict, grad_scores: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given d(loss)/d(scores) for a cached forward pass."""
        s = cache["scores"]
        dz = grad_scores * s * (1.0 - s)  # sigmoid chain
        if not self.hidden:
            return {"w": cache["x"].T @ dz, "b": dz.sum(axis=0)}
        h = cache["h"]
        dw2 = h.T @ dz
        dh = dz @ self.params["w2"].T
        dpre = dh * (1.0 - h * h)  # tanh chain
        return {
            "w1": cache["x"].T @ dpre,
            "b1": dpre.sum(axis=0),
            "w2": dw2,
            "b2": dz.sum(axis=0),
        }

    def zero_like_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}


class Adam:
    """Standard bias-corrected Adam over a dict of named parameter arrays."""

    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for key, p in params.items():
            g = grads[key]
            if key not in self.m:
                self.m[key] = np.zeros_like(p)
                self.v[key] = np.zeros_like(p)
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            m_hat = self.m[key] / (1.0 - self.beta1**self.t)
            v_hat = self.v[key] / (1.0 - self.beta2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
