"""Source-vs-target domain classifier and its importance weights.

A linear logistic model trained by full-batch gradient descent: the simplest
deterministic reading of a "domain classifier". Inputs are standardized per
column with statistics stored in the model; source samples are labeled 0 and
target samples 1. Training is single-threaded per model; trained models are
immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "TrainConfig",
    "DiscriminatorModel",
    "train_discriminator",
    "predict_target_prob",
    "density_ratio_weights",
]

PROB_FLOOR = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2_penalty < 0:
            raise ValueError(f"l2_penalty must be >= 0, got {self.l2_penalty}")


@dataclass(frozen=True)
class DiscriminatorModel:
    weights: np.ndarray  # (d,)
    bias: float
    feature_mean: np.ndarray  # (d,) training statistics
    feature_std: np.ndarray  # (d,)
    n_source: int
    n_target: int
    loss_history: tuple[float, ...]  # per-epoch regularized loss, non-increasing


def train_discriminator(
    source: np.ndarray, target: np.ndarray, config: TrainConfig | None = None
) -> DiscriminatorModel:
    """Fit the regularized logistic domain classifier (source = 0, target = 1)."""
    config = config or TrainConfig()
    s = np.asarray(source, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if s.ndim != 2 or t.ndim != 2:
        raise ValueError("source and target must be 2-D arrays")
    if s.shape[1] != t.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: source has {s.shape[1]}, target has {t.shape[1]}"
        )
    if s.shape[0] < 1 or t.shape[0] < 1:
        raise ValueError("source and target must each have at least one sample")

    x = np.vstack([s, t])
    y = np.concatenate([np.zeros(s.shape[0]), np.ones(t.shape[0])])
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    xs = (x - mean) / std

    n, d = xs.shape
    w = np.zeros(d)
    b = 0.0
    lr, l2 = config.learning_rate, config.l2_penalty
    losses: list[float] = []
    for _ in range(config.epochs):
        z = xs @ w + b
        # binary cross-entropy as mean(log(1 + e^z) - y z): stable at large |z|
        loss = float(np.logaddexp(0.0, z).mean() - (y * z).mean() + 0.5 * l2 * (w @ w))
        if not np.isfinite(loss):
            raise ValueError("non-finite training loss")
        losses.append(loss)
        g = expit(z) - y
        w -= lr * (xs.T @ g / n + l2 * w)
        b -= lr * float(g.mean())

    w.setflags(write=False)
    return DiscriminatorModel(
        weights=w,
        bias=b,
        feature_mean=mean,
        feature_std=std,
        n_source=s.shape[0],
        n_target=t.shape[0],
        loss_history=tuple(losses),
    )


def predict_target_prob(model: DiscriminatorModel, x: np.ndarray) -> np.ndarray:
    """Probability of target-domain membership, clamped to [1e-6, 1 - 1e-6]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"expected shape (n, {model.weights.shape[0]}), got {x.shape}"
        )
    xs = (x - model.feature_mean) / model.feature_std
    p = expit(xs @ model.weights + model.bias)
    return np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def density_ratio_weights(probs: np.ndarray, n_source: int, n_target: int) -> np.ndarray:
    """Importance weights (n_source / n_target) * p / (1 - p).

    Clamped probabilities guarantee finite, strictly positive weights.
    """
    if n_source < 1 or n_target < 1:
        raise ValueError("n_source and n_target must be >= 1")
    p = np.asarray(probs, dtype=np.float64)
    return (n_source / n_target) * p / (1.0 - p)
