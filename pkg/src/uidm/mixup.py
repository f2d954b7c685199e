"""Intra-domain interpolation between trusted and uncertain target examples.

Hybrid mixing pairs trusted rows (labeled shots plus selected pseudo-labeled
anchors) with rows from the uncertain remainder; self mixing pairs rows of a
class group with a permutation of itself. The interpolation coefficient is
Beta-distributed and skewed so the trusted side dominates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class MixupConfig:
    beta_a: float = 2.0
    beta_b: float = 0.5
    lambda_floor_adjust: bool = True  # fold lambda above 0.5
    sharpen_T: float | None = None    # optional temperature on mixed labels

    def __post_init__(self):
        if self.beta_a <= 0 or self.beta_b <= 0:
            raise ConfigError(
                f"beta parameters must be positive, got ({self.beta_a}, {self.beta_b})")
        if self.sharpen_T is not None and self.sharpen_T <= 0:
            raise ConfigError(f"sharpen_T must be positive, got {self.sharpen_T}")


@dataclass
class MixedBatch:
    """One interpolated batch plus the bookkeeping needed to replay it."""

    features: np.ndarray  # (B, d)
    labels: np.ndarray    # (B, K) rows on the simplex
    lam: np.ndarray       # (B,) weight on the trusted side
    left_idx: np.ndarray  # (B,) rows drawn from the trusted pool
    right_idx: np.ndarray  # (B,) rows drawn from the partner pool
    right_from_trusted: bool = False  # partner pool fell back to trusted

    def __len__(self):
        return self.features.shape[0]


def sample_lambda(config: MixupConfig, rng: np.random.Generator, size=None):
    """Beta(a, b) draw; the floor adjust reflects values below 0.5 upward."""
    lam = rng.beta(config.beta_a, config.beta_b, size=size)
    if config.lambda_floor_adjust:
        lam = np.maximum(lam, 1.0 - lam)
    return lam


def mix_pair(x1, y1, x2, y2, lam):
    """Convex combination with weight lam on the first (trusted) argument.

    Computed as lam*a + (1-lam)*b so lam of exactly 0 or 1 returns the
    corresponding endpoint bit-for-bit on finite inputs.
    """
    lam_f = np.asarray(lam, dtype=np.float64)
    if lam_f.ndim == 1:
        lam_x = lam_f[:, None]
    else:
        lam_x = lam_f
    x = lam_x * np.asarray(x1, dtype=np.float64) \
        + (1.0 - lam_x) * np.asarray(x2, dtype=np.float64)
    y = lam_x * np.asarray(y1, dtype=np.float64) \
        + (1.0 - lam_x) * np.asarray(y2, dtype=np.float64)
    return x, y


def _maybe_sharpen(labels: np.ndarray, config: MixupConfig) -> np.ndarray:
    if config.sharpen_T is None:
        return labels
    q = np.power(np.maximum(labels, 0.0), 1.0 / config.sharpen_T)
    return q / q.sum(axis=1, keepdims=True)


def _draw_indices(n_pool: int, batch_size: int, rng: np.random.Generator):
    # sample without replacement whenever the pool is large enough
    replace = batch_size > n_pool
    return rng.choice(n_pool, size=batch_size, replace=replace)


def hybrid_mixup(trusted_X, trusted_Y, rest_X, rest_Y, batch_size: int,
                 config: MixupConfig, rng: np.random.Generator) -> MixedBatch:
    """Mix trusted rows against uncertain partners.

    An empty partner pool falls back to trusted-vs-trusted mixing (logged
    once per call) so tiny pools never stall a round.
    """
    trusted_X = np.asarray(trusted_X, dtype=np.float64)
    trusted_Y = np.asarray(trusted_Y, dtype=np.float64)
    if trusted_X.shape[0] == 0:
        raise ConfigError("hybrid mixup needs a nonempty trusted pool")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")

    rest_X = np.asarray(rest_X, dtype=np.float64)
    rest_Y = np.asarray(rest_Y, dtype=np.float64)
    right_from_trusted = rest_X.shape[0] == 0
    if right_from_trusted:
        logger.warning("hybrid mixup partner pool empty; mixing trusted "
                       "examples against each other")
        rest_X, rest_Y = trusted_X, trusted_Y

    left_idx = _draw_indices(trusted_X.shape[0], batch_size, rng)
    right_idx = _draw_indices(rest_X.shape[0], batch_size, rng)
    lam = np.atleast_1d(sample_lambda(config, rng, size=batch_size))
    x, y = mix_pair(trusted_X[left_idx], trusted_Y[left_idx],
                    rest_X[right_idx], rest_Y[right_idx], lam)
    return MixedBatch(features=x, labels=_maybe_sharpen(y, config), lam=lam,
                      left_idx=left_idx, right_idx=right_idx,
                      right_from_trusted=right_from_trusted)


def self_mixup(group_X, group_Y, config: MixupConfig, rng: np.random.Generator,
               lam=None) -> MixedBatch:
    """Mix a class group against a random permutation of itself."""
    group_X = np.asarray(group_X, dtype=np.float64)
    group_Y = np.asarray(group_Y, dtype=np.float64)
    n = group_X.shape[0]
    if n == 0:
        raise ConfigError("self mixup needs a nonempty group")
    perm = rng.permutation(n)
    if lam is None:
        lam = sample_lambda(config, rng, size=n)
    lam = np.broadcast_to(np.atleast_1d(np.asarray(lam, dtype=np.float64)),
                          (n,)).copy()
    x, y = mix_pair(group_X, group_Y, group_X[perm], group_Y[perm], lam)
    return MixedBatch(features=x, labels=_maybe_sharpen(y, config), lam=lam,
                      left_idx=np.arange(n), right_idx=perm)
