"""Source pre-training and mixup-driven target adaptation loops.

Adaptation never touches source data and never updates the classifier: the
frozen class vectors anchor the label space while the encoder is pulled
toward them through interpolated target batches.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tensor, log, mul, scale, softmax, sub, tsum
from .datasets import Dataset, TargetSplit, augment_batch
from .errors import ConfigError, NumericError
from .mixup import MixupConfig, hybrid_mixup, self_mixup
from .network import (
    Model,
    ModelConfig,
    classify,
    copy_model,
    encode,
    freeze_classifier,
    init_model,
    predict_proba,
)
from .uncertainty import (
    PoolScores,
    SelectionResult,
    UncertaintyConfig,
    score_pool,
    source_like_select,
)

BASELINE_KINDS = ("source_only", "ent_min", "uidm_wo_selection",
                  "uidm_wo_hybrid", "uidm_wo_self")

METRICS_HEADER = ["round", "step", "split", "metric", "value"]


@dataclass
class TrainConfig:
    lr_encoder: float = 1e-3
    lr_head: float = 1e-2
    momentum: float = 0.9
    alpha: float = 200.0          # weight on the consistency term
    outer_rounds: int = 10        # re-score/re-select cycles
    inner_steps: int = 100        # gradient steps per round
    batch_size: int = 32
    max_epochs: int = 200         # pre-training only
    patience: int = 10            # pre-training early stop
    augment_strength: float = 0.1
    entropy_constraint: bool = False
    ent_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.lr_encoder <= 0 or self.lr_head <= 0:
            raise ConfigError("learning rates must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        for name in ("outer_rounds", "inner_steps", "batch_size",
                     "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.augment_strength < 0:
            raise ConfigError("augment_strength must be >= 0")


@dataclass
class MetricRow:
    round: int
    step: int
    split: str
    metric: str
    value: float


@dataclass
class RoundRecord:
    """Pool scores and the resulting trusted/rest partition for one round."""

    round: int
    scores: PoolScores
    selection: SelectionResult


@dataclass
class PretrainResult:
    model: Model
    metrics: list
    val_accuracy: float


@dataclass
class AdaptResult:
    model: Model
    metrics: list
    round_records: list = field(default_factory=list)

    def final_accuracy(self, split: str = "unlabeled") -> float:
        vals = [r.value for r in self.metrics
                if r.split == split and r.metric == "accuracy"]
        if not vals:
            raise ValueError(f"no accuracy rows for split {split!r}")
        return vals[-1]


class SGD:
    """Momentum SGD over (tensor, lr) groups; step() also clears grads."""

    def __init__(self, params_with_lr, momentum: float = 0.9):
        self.groups = [(p, lr) for p, lr in params_with_lr]
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p, _ in self.groups]

    def step(self):
        for (p, lr), v in zip(self.groups, self.velocity):
            if not p.requires_grad or p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            p.data -= lr * v
        self.zero_grad()

    def zero_grad(self):
        for p, _ in self.groups:
            p.zero_grad()


def one_hot(y: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise ConfigError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{y.min()}, {y.max()}]")
    return np.eye(num_classes)[y]


# -- losses --------------------------------------------------------------------


def cross_entropy_loss(outputs: Tensor, targets: np.ndarray,
                       from_logits: bool = True) -> Tensor:
    """Mean soft cross entropy; targets are (B, K) rows on the simplex."""
    targets = np.asarray(targets, dtype=np.float64)
    if outputs.shape != targets.shape:
        raise ConfigError(
            f"outputs {outputs.shape} and targets {targets.shape} disagree")
    probs = softmax(outputs) if from_logits else outputs
    ll = mul(log(probs), Tensor(targets))
    return scale(tsum(ll), -1.0 / targets.shape[0])


def mse_consistency_loss(probs: Tensor, targets: np.ndarray) -> Tensor:
    """Per-example squared error summed over classes, averaged over batch."""
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape:
        raise ConfigError(
            f"probs {probs.shape} and targets {targets.shape} disagree")
    diff = sub(probs, Tensor(targets))
    return scale(tsum(mul(diff, diff)), 1.0 / targets.shape[0])


def prediction_entropy(probs: Tensor) -> Tensor:
    """Mean Shannon entropy of predicted distributions, as a graph node."""
    plogp = mul(probs, log(probs))
    return scale(tsum(plogp), -1.0 / probs.shape[0])


# -- evaluation ----------------------------------------------------------------


def evaluate(model: Model, X: np.ndarray, y: np.ndarray) -> float:
    """Clean-forward accuracy."""
    probs = predict_proba(model, X)
    preds = np.argmax(probs.data, axis=1)
    return float(np.mean(preds == np.asarray(y)))


def selection_accuracy(record: RoundRecord, hidden_labels: np.ndarray):
    """Pseudo-label accuracy on the trusted subset vs the whole pool.

    Reporting-only: hidden labels never feed back into training.
    """
    hidden = np.asarray(hidden_labels)
    pool_acc = float(np.mean(record.scores.predicted == hidden))
    idx = record.selection.selected_idx
    if idx.size == 0:
        return float("nan"), pool_acc
    sel_acc = float(np.mean(record.scores.predicted[idx] == hidden[idx]))
    return sel_acc, pool_acc


def _check_finite(value: float, where: str):
    if not np.isfinite(value):
        raise NumericError(f"non-finite loss ({value}) at {where}")


# -- source pre-training -------------------------------------------------------


def pretrain(source: Dataset, model_config: ModelConfig,
             train_config: TrainConfig) -> PretrainResult:
    """Cross-entropy training with a 90/10 holdout and early stopping.

    Keeps the weights from the best-validation epoch.
    """
    rng = np.random.default_rng(train_config.seed)
    model = init_model(model_config, rng)
    n = len(source)
    perm = rng.permutation(n)
    n_val = max(1, int(round(0.1 * n)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if train_idx.size == 0:
        raise ConfigError(f"dataset of {n} rows is too small to split")

    X, y = source.features, source.labels
    Y = one_hot(y, model_config.num_classes)
    opt = SGD([(p, train_config.lr_encoder) for p in model.encoder_params()]
              + [(model.classifier_weight, train_config.lr_head)],
              momentum=train_config.momentum)

    rows = []
    best_acc = -np.inf
    best_state = None
    stale = 0
    for epoch in range(train_config.max_epochs):
        order = rng.permutation(train_idx)
        losses = []
        for lo in range(0, order.size, train_config.batch_size):
            batch = order[lo:lo + train_config.batch_size]
            xb = augment_batch(X[batch], train_config.augment_strength, rng)
            logits = classify(model, encode(model, xb, dropout_active=True,
                                            rng=rng))
            loss = cross_entropy_loss(logits, Y[batch])
            _check_finite(loss.data, f"epoch {epoch}, batch at {lo}")
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        val_acc = evaluate(model, X[val_idx], y[val_idx])
        rows.append(MetricRow(epoch, 0, "train", "loss", float(np.mean(losses))))
        rows.append(MetricRow(epoch, 0, "val", "accuracy", val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_state = [p.data.copy() for p in model.all_params()]
            stale = 0
        else:
            stale += 1
            if stale >= train_config.patience:
                break
    for p, saved in zip(model.all_params(), best_state):
        p.data = saved
    return PretrainResult(model=model, metrics=rows, val_accuracy=best_acc)


# -- target adaptation ---------------------------------------------------------


def _self_mixup_batches(trusted_X, trusted_Y, trusted_cls, num_classes,
                        batch_size, mix_cfg, rng):
    """Per-class self mixing; large groups are subsampled to batch_size."""
    xs, ys = [], []
    for cls in range(num_classes):
        members = np.flatnonzero(trusted_cls == cls)
        if members.size == 0:
            continue
        if members.size > batch_size:
            members = rng.choice(members, size=batch_size, replace=False)
        batch = self_mixup(trusted_X[members], trusted_Y[members], mix_cfg, rng)
        xs.append(batch.features)
        ys.append(batch.labels)
    return np.concatenate(xs), np.concatenate(ys)


def _adapt_loop(model: Model, split: TargetSplit, train_cfg: TrainConfig,
                unc_cfg: UncertaintyConfig, mix_cfg: MixupConfig, *,
                use_labeled: bool = True, use_hybrid: bool = True,
                use_self: bool = True, supervised_ce: bool = False,
                entropy_constraint: bool = False) -> AdaptResult:
    model = copy_model(model)
    freeze_classifier(model)
    rng = np.random.default_rng(train_cfg.seed)
    opt = SGD([(p, train_cfg.lr_encoder) for p in model.encoder_params()],
              momentum=train_cfg.momentum)
    k = model.config.num_classes
    pool = split.unlabeled_X
    if use_labeled and split.labeled_X.shape[0] > 0:
        labeled_X = split.labeled_X
        labeled_Y = one_hot(split.labeled_y, k)
        labeled_cls = split.labeled_y
    else:
        labeled_X = np.empty((0, pool.shape[1]))
        labeled_Y = np.empty((0, k))
        labeled_cls = np.empty(0, dtype=np.int64)

    rows = []
    round_records = []
    for rnd in range(train_cfg.outer_rounds):
        scores = score_pool(model, pool, unc_cfg, rng)
        sel = source_like_select(scores, unc_cfg.snpc, unc_cfg.harden_selected)
        round_records.append(RoundRecord(rnd, scores, sel))

        trusted_X = np.concatenate([labeled_X, pool[sel.selected_idx]])
        trusted_Y = np.concatenate([labeled_Y, sel.selected_labels])
        trusted_cls = np.concatenate(
            [labeled_cls, scores.predicted[sel.selected_idx]])
        rest_X = pool[sel.rest_idx]
        rest_Y = sel.rest_labels

        for step in range(train_cfg.inner_steps):
            total = None
            if use_hybrid:
                hb = hybrid_mixup(trusted_X, trusted_Y, rest_X, rest_Y,
                                  train_cfg.batch_size, mix_cfg, rng)
                logits = classify(model, encode(model, hb.features,
                                                dropout_active=True, rng=rng))
                total = cross_entropy_loss(logits, hb.labels)
            if use_self:
                ux, uy = _self_mixup_batches(trusted_X, trusted_Y, trusted_cls,
                                             k, train_cfg.batch_size, mix_cfg,
                                             rng)
                probs = softmax(classify(model, encode(model, ux,
                                                       dropout_active=True,
                                                       rng=rng)))
                term = scale(mse_consistency_loss(probs, uy), train_cfg.alpha)
                total = term if total is None else total + term
            if supervised_ce:
                logits = classify(model, encode(model, labeled_X,
                                                dropout_active=True, rng=rng))
                term = cross_entropy_loss(logits, labeled_Y)
                total = term if total is None else total + term
            if entropy_constraint:
                n_pool = pool.shape[0]
                batch = rng.choice(n_pool, size=min(train_cfg.batch_size, n_pool),
                                   replace=False)
                probs = softmax(classify(model, encode(model, pool[batch],
                                                       dropout_active=True,
                                                       rng=rng)))
                term = scale(prediction_entropy(probs), train_cfg.ent_weight)
                total = term if total is None else total + term
            if total is None:
                raise ConfigError("adaptation loop has no loss terms enabled")
            _check_finite(total.data, f"round {rnd}, step {step}")
            total.backward()
            opt.step()
            rows.append(MetricRow(rnd, step, "train", "loss",
                                  float(total.data)))

        if split.val_X is not None and split.val_X.shape[0] > 0:
            rows.append(MetricRow(rnd, train_cfg.inner_steps, "val",
                                  "accuracy",
                                  evaluate(model, split.val_X, split.val_y)))
        if split.hidden_labels is not None:
            rows.append(MetricRow(rnd, train_cfg.inner_steps, "unlabeled",
                                  "accuracy",
                                  evaluate(model, pool, split.hidden_labels)))
    return AdaptResult(model=model, metrics=rows, round_records=round_records)


def adapt_uidm(model: Model, split: TargetSplit, train_cfg: TrainConfig,
               unc_cfg: UncertaintyConfig | None = None,
               mix_cfg: MixupConfig | None = None) -> AdaptResult:
    """Full method: selection, hybrid mixing, self mixing, frozen classifier."""
    return _adapt_loop(model, split, train_cfg,
                       unc_cfg or UncertaintyConfig(),
                       mix_cfg or MixupConfig(),
                       entropy_constraint=train_cfg.entropy_constraint)


def adapt_uidm_unsupervised(model: Model, split: TargetSplit,
                            train_cfg: TrainConfig,
                            unc_cfg: UncertaintyConfig | None = None,
                            mix_cfg: MixupConfig | None = None) -> AdaptResult:
    """Label-free variant: the trusted pool is the selected set alone."""
    unc_cfg = unc_cfg or UncertaintyConfig()
    if unc_cfg.snpc < 1:
        raise ConfigError("unsupervised adaptation needs snpc >= 1")
    return _adapt_loop(model, split, train_cfg, unc_cfg,
                       mix_cfg or MixupConfig(), use_labeled=False,
                       entropy_constraint=train_cfg.entropy_constraint)


def run_baseline(kind: str, model: Model, split: TargetSplit,
                 train_cfg: TrainConfig,
                 unc_cfg: UncertaintyConfig | None = None,
                 mix_cfg: MixupConfig | None = None) -> AdaptResult:
    """Reference systems; the ablations reuse the exact adaptation loop."""
    unc_cfg = unc_cfg or UncertaintyConfig()
    mix_cfg = mix_cfg or MixupConfig()
    if kind == "source_only":
        frozen = copy_model(model)
        rows = [
            MetricRow(0, 0, "val", "accuracy",
                      evaluate(frozen, split.val_X, split.val_y)),
            MetricRow(0, 0, "unlabeled", "accuracy",
                      evaluate(frozen, split.unlabeled_X, split.hidden_labels)),
        ]
        return AdaptResult(model=frozen, metrics=rows)
    if kind == "ent_min":
        return _adapt_loop(model, split, train_cfg, unc_cfg, mix_cfg,
                           use_hybrid=False, use_self=False,
                           supervised_ce=True, entropy_constraint=True)
    if kind == "uidm_wo_selection":
        return adapt_uidm(model, split, train_cfg,
                          replace(unc_cfg, snpc=0), mix_cfg)
    if kind == "uidm_wo_hybrid":
        return _adapt_loop(model, split, train_cfg, unc_cfg, mix_cfg,
                           use_hybrid=False,
                           entropy_constraint=train_cfg.entropy_constraint)
    if kind == "uidm_wo_self":
        return _adapt_loop(model, split, train_cfg, unc_cfg, mix_cfg,
                           use_self=False,
                           entropy_constraint=train_cfg.entropy_constraint)
    raise ConfigError(f"unknown baseline kind {kind!r}; "
                      f"expected one of {BASELINE_KINDS}")


# -- metric serialization ------------------------------------------------------


def metrics_to_csv(rows, path) -> None:
    """Stable byte-for-byte serialization (repr round-trips every float)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for r in rows:
            writer.writerow([r.round, r.step, r.split, r.metric,
                             repr(float(r.value))])


def records_to_csv(round_records, path, index_map=None) -> None:
    """Per-round pool scores: round,index,predicted_class,entropy,p0..p{K-1}.

    ``index_map`` translates pool positions to original dataset indices.
    """
    if round_records:
        k = round_records[0].scores.soft_labels.shape[1]
    else:
        k = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "index", "predicted_class", "entropy"]
                        + [f"p{i}" for i in range(k)])
        for rec in round_records:
            scores = rec.scores
            for pos in range(len(scores)):
                idx = pos if index_map is None else int(index_map[pos])
                writer.writerow(
                    [rec.round, idx, int(scores.predicted[pos]),
                     repr(float(scores.entropies[pos]))]
                    + [repr(float(v)) for v in scores.soft_labels[pos]])
