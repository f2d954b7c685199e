"""Uncertainty scoring of the unlabeled pool and source-like selection.

Soft labels average dropout-perturbed predictions over two augmented views;
their entropies rank examples within each predicted class so the most
confident few per class become trusted pseudo-labeled anchors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import LOG_FLOOR, no_grad
from .datasets import augment, augment_batch
from .errors import ConfigError
from .network import Model, predict_proba


@dataclass
class UncertaintyConfig:
    n_r: int = 5                  # dropout forward passes per view
    snpc: int = 5                 # selected examples per predicted class
    augment_strength: float = 0.1
    harden_selected: bool = True  # one-hot pseudo-labels for the trusted set

    def __post_init__(self):
        if self.n_r < 1:
            raise ConfigError(f"n_r must be >= 1, got {self.n_r}")
        if self.snpc < 0:
            raise ConfigError(f"snpc must be >= 0, got {self.snpc}")
        if self.augment_strength < 0:
            raise ConfigError(
                f"augment_strength must be >= 0, got {self.augment_strength}")


@dataclass
class PoolScores:
    """Per-example soft labels and their uncertainty over an unlabeled pool."""

    soft_labels: np.ndarray  # (N, K), rows on the simplex
    entropies: np.ndarray    # (N,)
    predicted: np.ndarray    # (N,) argmax of each soft label

    def __len__(self):
        return self.soft_labels.shape[0]


@dataclass
class SelectionResult:
    """Partition of a scored pool into trusted and remaining examples.

    Index arrays are positions into the scored pool, each sorted ascending;
    label rows align with their index array.
    """

    selected_idx: np.ndarray
    selected_labels: np.ndarray  # (n_sel, K)
    rest_idx: np.ndarray
    rest_labels: np.ndarray      # (n_rest, K)

    @property
    def num_selected(self):
        return self.selected_idx.shape[0]


def entropy(p: np.ndarray) -> np.ndarray | float:
    """Shannon entropy in nats, log clamped so zero entries contribute 0."""
    p = np.asarray(p, dtype=np.float64)
    logs = np.log(np.maximum(p, LOG_FLOOR))
    e = -np.sum(p * logs, axis=-1)
    return float(e) if e.ndim == 0 else e


def estimate_soft_label(model: Model, x: np.ndarray, config: UncertaintyConfig,
                        rng: np.random.Generator) -> np.ndarray:
    """Average 2 * n_r dropout predictions over two augmented views of x."""
    x = np.asarray(x, dtype=np.float64)
    x1 = augment(x, config.augment_strength, rng)
    x2 = augment(x, config.augment_strength, rng)
    total = np.zeros(model.config.num_classes)
    with no_grad():
        for _ in range(config.n_r):
            total += predict_proba(model, x1[None, :], dropout_active=True,
                                   rng=rng).data[0]
            total += predict_proba(model, x2[None, :], dropout_active=True,
                                   rng=rng).data[0]
    return total / (2.0 * config.n_r)


def estimate_soft_labels(model: Model, X: np.ndarray, config: UncertaintyConfig,
                         rng: np.random.Generator) -> np.ndarray:
    """Batched soft labels for a pool; one dropout mask draw per pass."""
    X = np.asarray(X, dtype=np.float64)
    X1 = augment_batch(X, config.augment_strength, rng)
    X2 = augment_batch(X, config.augment_strength, rng)
    total = np.zeros((X.shape[0], model.config.num_classes))
    with no_grad():
        for _ in range(config.n_r):
            total += predict_proba(model, X1, dropout_active=True, rng=rng).data
            total += predict_proba(model, X2, dropout_active=True, rng=rng).data
    return total / (2.0 * config.n_r)


def score_pool(model: Model, X: np.ndarray, config: UncertaintyConfig,
               rng: np.random.Generator) -> PoolScores:
    P = estimate_soft_labels(model, X, config, rng)
    return PoolScores(soft_labels=P, entropies=entropy(P),
                      predicted=np.argmax(P, axis=1))


def source_like_select(scores: PoolScores, snpc: int,
                       harden_selected: bool = True) -> SelectionResult:
    """Keep the snpc lowest-entropy examples per predicted class.

    Ties break toward the lower pool index. snpc=0 selects nothing, which
    turns downstream mixing into its selection-free ablation.
    """
    if snpc < 0:
        raise ConfigError(f"snpc must be >= 0, got {snpc}")
    n, k = scores.soft_labels.shape
    chosen = []
    for cls in range(k):
        cand = np.flatnonzero(scores.predicted == cls)
        if cand.size == 0:
            continue
        order = cand[np.argsort(scores.entropies[cand], kind="stable")]
        chosen.append(order[:snpc])
    selected_idx = (np.sort(np.concatenate(chosen)) if chosen
                    else np.empty(0, dtype=np.int64))
    rest_idx = np.setdiff1d(np.arange(n), selected_idx)
    if harden_selected:
        selected_labels = np.eye(k)[scores.predicted[selected_idx]]
    else:
        selected_labels = scores.soft_labels[selected_idx].copy()
    return SelectionResult(
        selected_idx=selected_idx.astype(np.int64),
        selected_labels=selected_labels,
        rest_idx=rest_idx.astype(np.int64),
        rest_labels=scores.soft_labels[rest_idx].copy(),
    )
