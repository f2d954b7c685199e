"""Synthetic domain-shift datasets, SSDA shot splits, and vector augmentation.

Image benchmarks are replaced by low-dimensional generators: a rotated
two-moons pair (K=2) and a translated Gaussian-blob constellation
(configurable K). Every generator is a pure function of its arguments,
seed included.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# blob constellation geometry: class centers sit on this circle, and the
# target constellation rotates by shift_scale * degrees-per-unit
BLOBS_LAYOUT_RADIUS = 3.0
BLOBS_ROTATION_DEG_PER_UNIT = 10.0

# augment() rotates the first two coordinates by up to strength * this angle
AUGMENT_MAX_ROTATION_DEG = 15.0


@dataclass
class Dataset:
    features: np.ndarray  # (N, d) float64
    labels: np.ndarray    # (N,) int64 in [0, K)
    domain_tag: str       # "source" | "target"
    name: str

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.features.shape[0]


@dataclass
class TargetSplit:
    """MME-style shot split of a target dataset.

    ``hidden_labels`` is the evaluation-only side table for the unlabeled
    pool; training code must never read it.
    """

    labeled_X: np.ndarray
    labeled_y: np.ndarray
    unlabeled_X: np.ndarray
    val_X: np.ndarray
    val_y: np.ndarray
    labeled_idx: np.ndarray = field(default=None)
    unlabeled_idx: np.ndarray = field(default=None)
    val_idx: np.ndarray = field(default=None)
    hidden_labels: np.ndarray = field(default=None)  # evaluation only

    @property
    def num_labeled(self):
        return self.labeled_X.shape[0]

    @property
    def num_unlabeled(self):
        return self.unlabeled_X.shape[0]


def _rotation_matrix(angle_deg: float) -> np.ndarray:
    theta = np.deg2rad(angle_deg)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def make_two_moons_shift(n_per_domain: int, rotation_deg: float, noise_sd: float,
                         translate=(0.0, 0.0), seed: int = 0):
    """Two interleaved half circles; the target copy is rotated + translated.

    The moons are centered on the origin so a 180-degree rotation maps one
    moon exactly onto the other. The target domain applies the rigid
    transform to the same generated sample, so a null shift reproduces the
    source features exactly.
    """
    rng = np.random.default_rng(seed)
    n0 = (n_per_domain + 1) // 2
    n1 = n_per_domain - n0
    t = rng.uniform(0.0, np.pi, size=n0)
    moon0 = np.column_stack([np.cos(t) - 0.5, np.sin(t) - 0.25])
    moon1 = -moon0[:n1]
    features = np.vstack([moon0, moon1])
    features = features + rng.normal(0.0, noise_sd, size=features.shape)
    labels = np.concatenate([np.zeros(n0, dtype=np.int64),
                             np.ones(n1, dtype=np.int64)])

    rot = _rotation_matrix(rotation_deg)
    target_features = features @ rot.T + np.asarray(translate, dtype=np.float64)

    source = Dataset(features, labels, "source", "two_moons_source")
    target = Dataset(target_features, labels.copy(), "target", "two_moons_target")
    return source, target


def make_blobs_shift(K: int, n_per_class: int, d: int, shift_scale: float,
                     spread: float, seed: int = 0):
    """K Gaussian clusters on a circle; target clusters drift and rotate.

    Target points are a fresh draw from per-class centers that were rotated
    by ``shift_scale * BLOBS_ROTATION_DEG_PER_UNIT`` degrees and translated
    by random in-plane offsets of magnitude ``shift_scale``. shift_scale=0
    leaves the two domains identically distributed.
    """
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(K) / K
    centers = np.zeros((K, d))
    centers[:, 0] = BLOBS_LAYOUT_RADIUS * np.cos(angles)
    centers[:, 1] = BLOBS_LAYOUT_RADIUS * np.sin(angles)

    labels = np.repeat(np.arange(K, dtype=np.int64), n_per_class)
    source_features = centers[labels] + rng.normal(0.0, spread,
                                                   size=(K * n_per_class, d))

    rot = _rotation_matrix(shift_scale * BLOBS_ROTATION_DEG_PER_UNIT)
    target_centers = centers.copy()
    target_centers[:, :2] = centers[:, :2] @ rot.T
    offset_angles = rng.uniform(0.0, 2.0 * np.pi, size=K)
    target_centers[:, 0] += shift_scale * np.cos(offset_angles)
    target_centers[:, 1] += shift_scale * np.sin(offset_angles)
    target_features = target_centers[labels] + rng.normal(
        0.0, spread, size=(K * n_per_class, d))

    source = Dataset(source_features, labels.copy(), "source", "blobs_source")
    target = Dataset(target_features, labels.copy(), "target", "blobs_target")
    return source, target


def ssda_split(target: Dataset, shots: int, val_per_class: int,
               seed: int = 0) -> TargetSplit:
    """Per class, draw ``shots`` labeled and ``val_per_class`` validation
    examples uniformly without replacement; everything else is unlabeled."""
    rng = np.random.default_rng(seed)
    labeled_idx, val_idx = [], []
    for k in range(target.num_classes):
        pool = np.flatnonzero(target.labels == k)
        needed = shots + val_per_class + 1
        if pool.size < needed:
            raise ConfigError(
                f"class {k} has {pool.size} examples, needs >= {needed} "
                f"for a {shots}-shot split with {val_per_class} validation"
            )
        picked = rng.choice(pool, size=shots + val_per_class, replace=False)
        labeled_idx.append(picked[:shots])
        val_idx.append(picked[shots:])
    labeled_idx = np.concatenate(labeled_idx)
    val_idx = np.concatenate(val_idx)
    taken = np.concatenate([labeled_idx, val_idx])
    unlabeled_idx = np.setdiff1d(np.arange(len(target)), taken)
    return TargetSplit(
        labeled_X=target.features[labeled_idx],
        labeled_y=target.labels[labeled_idx],
        unlabeled_X=target.features[unlabeled_idx],
        val_X=target.features[val_idx],
        val_y=target.labels[val_idx],
        labeled_idx=labeled_idx,
        unlabeled_idx=unlabeled_idx,
        val_idx=val_idx,
        hidden_labels=target.labels[unlabeled_idx],
    )


def augment(x: np.ndarray, strength: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian jitter plus a small rotation of the first two coordinates.

    strength=0 is an exact identity but still advances the rng stream the
    same number of draws, keeping downstream sampling aligned across
    strengths.
    """
    x = np.asarray(x, dtype=np.float64)
    out = x + rng.normal(0.0, strength, size=x.shape[-1])
    angle = rng.uniform(-1.0, 1.0) * strength * AUGMENT_MAX_ROTATION_DEG
    rot = _rotation_matrix(angle)
    out = out.copy()
    out[..., :2] = out[..., :2] @ rot.T
    return out


def augment_batch(X: np.ndarray, strength: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Row-by-row augment from a single stream (reproducible ordering)."""
    return np.stack([augment(row, strength, rng) for row in X])


# -- CSV interchange ----------------------------------------------------------


def save_csv(dataset: Dataset, path) -> None:
    """Header f0..f{d-1},label,domain; 17 significant digits per float."""
    d = dataset.num_features
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(d)] + ["label", "domain"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([f"{v:.17g}" for v in row]
                            + [int(label), dataset.domain_tag])


def load_csv(path, name: str | None = None) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-2:] != ["label", "domain"]:
            raise ConfigError(
                f"{path}: expected trailing 'label,domain' columns, got {header[-2:]}"
            )
        d = len(header) - 2
        feats, labels, domains = [], [], []
        for row in reader:
            feats.append([float(v) for v in row[:d]])
            labels.append(int(row[d]))
            domains.append(row[d + 1])
    domain_set = set(domains)
    if len(domain_set) != 1:
        raise ConfigError(f"{path}: mixed domain tags {sorted(domain_set)}")
    return Dataset(np.array(feats), np.array(labels), domains[0],
                   name or str(path))
