"""Estimator facade with the familiar fit/predict/transform surface.

``fit`` pre-trains on source data; ``adapt`` runs the mixup adaptation
against a target pool. Class labels may be arbitrary integers or strings;
they are mapped to internal indices and mapped back on predict.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datasets import Dataset, TargetSplit
from .mixup import MixupConfig
from .network import ModelConfig, encode, predict_proba
from .training import (
    TrainConfig,
    adapt_uidm,
    adapt_uidm_unsupervised,
    pretrain,
)
from .uncertainty import UncertaintyConfig


class UidmClassifier(BaseEstimator, ClassifierMixin):
    """Source classifier that can be adapted to a shifted target domain."""

    def __init__(self, hidden_dims=(64, 64), bottleneck_dim=32,
                 dropout_rate=0.5, classifier_temperature=0.05,
                 lr_encoder=1e-3, lr_head=1e-2, momentum=0.9, alpha=200.0,
                 outer_rounds=10, inner_steps=100, batch_size=32,
                 max_epochs=200, patience=10, augment_strength=0.1,
                 entropy_constraint=False, ent_weight=1.0, n_r=5, snpc=5,
                 harden_selected=True, beta_a=2.0, beta_b=0.5,
                 lambda_floor_adjust=True, random_state=0):
        self.hidden_dims = hidden_dims
        self.bottleneck_dim = bottleneck_dim
        self.dropout_rate = dropout_rate
        self.classifier_temperature = classifier_temperature
        self.lr_encoder = lr_encoder
        self.lr_head = lr_head
        self.momentum = momentum
        self.alpha = alpha
        self.outer_rounds = outer_rounds
        self.inner_steps = inner_steps
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.augment_strength = augment_strength
        self.entropy_constraint = entropy_constraint
        self.ent_weight = ent_weight
        self.n_r = n_r
        self.snpc = snpc
        self.harden_selected = harden_selected
        self.beta_a = beta_a
        self.beta_b = beta_b
        self.lambda_floor_adjust = lambda_floor_adjust
        self.random_state = random_state

    # -- config assembly ----------------------------------------------

    def _model_config(self, input_dim, num_classes):
        return ModelConfig(
            input_dim=input_dim, num_classes=num_classes,
            hidden_dims=tuple(self.hidden_dims),
            bottleneck_dim=self.bottleneck_dim,
            dropout_rate=self.dropout_rate,
            classifier_temperature=self.classifier_temperature)

    def _train_config(self):
        return TrainConfig(
            lr_encoder=self.lr_encoder, lr_head=self.lr_head,
            momentum=self.momentum, alpha=self.alpha,
            outer_rounds=self.outer_rounds, inner_steps=self.inner_steps,
            batch_size=self.batch_size, max_epochs=self.max_epochs,
            patience=self.patience, augment_strength=self.augment_strength,
            entropy_constraint=self.entropy_constraint,
            ent_weight=self.ent_weight, seed=self.random_state)

    def _uncertainty_config(self):
        return UncertaintyConfig(
            n_r=self.n_r, snpc=self.snpc,
            augment_strength=self.augment_strength,
            harden_selected=self.harden_selected)

    def _mixup_config(self):
        return MixupConfig(beta_a=self.beta_a, beta_b=self.beta_b,
                           lambda_floor_adjust=self.lambda_floor_adjust)

    def _encode_labels(self, y):
        y = np.asarray(y)
        idx = np.searchsorted(self.classes_, y)
        safe = np.clip(idx, 0, len(self.classes_) - 1)
        bad = self.classes_[safe] != y
        if np.any(bad):
            raise ValueError(f"unknown labels: {np.unique(y[bad])!r}")
        return idx.astype(np.int64)

    # -- estimator surface --------------------------------------------

    def fit(self, X, y):
        """Pre-train on labeled source data."""
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        self.n_features_in_ = X.shape[1]
        source = Dataset(X, self._encode_labels(y), "source", "fit")
        result = pretrain(source,
                          self._model_config(X.shape[1], len(self.classes_)),
                          self._train_config())
        self.model_ = result.model
        self.pretrain_metrics_ = result.metrics
        self.pretrain_val_accuracy_ = result.val_accuracy
        return self

    def adapt(self, X_unlabeled, X_labeled=None, y_labeled=None,
              X_val=None, y_val=None):
        """Adapt the fitted encoder to target data.

        With labeled shots this is the semi-supervised method; without,
        the unsupervised variant (selection only).
        """
        check_is_fitted(self, "model_")
        X_unlabeled = self._validate_features(X_unlabeled)
        d = self.n_features_in_
        k = len(self.classes_)
        unsupervised = X_labeled is None
        if unsupervised:
            labeled_X = np.empty((0, d))
            labeled_y = np.empty(0, dtype=np.int64)
        else:
            labeled_X, y_labeled = check_X_y(X_labeled, y_labeled)
            labeled_y = self._encode_labels(y_labeled)
        if X_val is None:
            val_X, val_y = np.empty((0, d)), np.empty(0, dtype=np.int64)
        else:
            val_X, y_val = check_X_y(X_val, y_val)
            val_y = self._encode_labels(y_val)
        split = TargetSplit(labeled_X=labeled_X, labeled_y=labeled_y,
                            unlabeled_X=X_unlabeled, val_X=val_X, val_y=val_y)
        runner = adapt_uidm_unsupervised if unsupervised else adapt_uidm
        result = runner(self.model_, split, self._train_config(),
                        self._uncertainty_config(), self._mixup_config())
        self.model_ = result.model
        self.adapt_result_ = result
        return self

    def _validate_features(self, X):
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = self._validate_features(X)
        return predict_proba(self.model_, X).data

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]

    def transform(self, X):
        """Unit-norm bottleneck embeddings."""
        check_is_fitted(self, "model_")
        X = self._validate_features(X)
        return encode(self.model_, X).data
