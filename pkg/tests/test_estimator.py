import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from uidm.datasets import make_blobs_shift, ssda_split
from uidm.estimator import UidmClassifier


def small_estimator(**overrides):
    params = dict(hidden_dims=(16,), bottleneck_dim=8, dropout_rate=0.25,
                  outer_rounds=2, inner_steps=5, batch_size=16, max_epochs=30,
                  patience=5, alpha=20.0, snpc=3, random_state=0)
    params.update(overrides)
    return UidmClassifier(**params)


def small_problem(seed=0):
    source, target = make_blobs_shift(K=3, n_per_class=40, d=2,
                                      shift_scale=0.8, spread=0.35, seed=seed)
    split = ssda_split(target, shots=1, val_per_class=3, seed=seed)
    return source, target, split


def test_fit_predict_on_source():
    source, _, _ = small_problem()
    est = small_estimator().fit(source.features, source.labels)
    acc = est.score(source.features, source.labels)
    assert acc >= 0.9
    assert est.n_features_in_ == 2
    assert np.array_equal(est.classes_, [0, 1, 2])


def test_predict_proba_simplex():
    source, _, _ = small_problem(seed=1)
    est = small_estimator().fit(source.features, source.labels)
    probs = est.predict_proba(source.features[:10])
    assert probs.shape == (10, 3)
    assert np.max(np.abs(probs.sum(axis=1) - 1.0)) < 1e-9
    assert np.all(probs >= 0)


def test_noncontiguous_labels_round_trip():
    source, _, _ = small_problem(seed=2)
    relabeled = np.array([2, 5, 9])[source.labels]
    est = small_estimator().fit(source.features, relabeled)
    assert np.array_equal(est.classes_, [2, 5, 9])
    preds = est.predict(source.features)
    assert set(np.unique(preds)).issubset({2, 5, 9})
    assert np.mean(preds == relabeled) >= 0.9


def test_transform_returns_unit_embeddings():
    source, _, _ = small_problem(seed=3)
    est = small_estimator().fit(source.features, source.labels)
    emb = est.transform(source.features[:7])
    assert emb.shape == (7, 8)
    assert np.max(np.abs(np.linalg.norm(emb, axis=1) - 1.0)) < 1e-9


def test_unfitted_raises():
    est = small_estimator()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((2, 2)))
    with pytest.raises(NotFittedError):
        est.adapt(np.zeros((5, 2)))


def test_feature_count_mismatch_raises():
    source, _, _ = small_problem(seed=4)
    est = small_estimator().fit(source.features, source.labels)
    with pytest.raises(ValueError, match="features"):
        est.predict(np.zeros((3, 5)))


def test_single_class_rejected():
    X = np.random.default_rng(0).normal(size=(20, 2))
    with pytest.raises(ValueError, match="classes"):
        small_estimator().fit(X, np.zeros(20, dtype=int))


def test_unknown_adapt_labels_rejected():
    source, _, split = small_problem(seed=5)
    est = small_estimator().fit(source.features, source.labels)
    with pytest.raises(ValueError, match="unknown labels"):
        est.adapt(split.unlabeled_X, split.labeled_X,
                  np.full(split.labeled_y.shape, 7))


def test_get_set_params_and_clone():
    est = small_estimator(alpha=33.0, snpc=4)
    params = est.get_params()
    assert params["alpha"] == 33.0 and params["snpc"] == 4
    est.set_params(alpha=11.0)
    assert est.get_params()["alpha"] == 11.0
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()


def test_adapt_semi_supervised_path():
    source, target, split = small_problem(seed=6)
    est = small_estimator(random_state=6).fit(source.features, source.labels)
    frozen_before = est.model_.classifier_weight.data.copy()
    est.adapt(split.unlabeled_X, split.labeled_X, split.labeled_y,
              split.val_X, split.val_y)
    assert est.model_.classifier_frozen
    assert np.array_equal(est.model_.classifier_weight.data, frozen_before)
    acc = np.mean(est.predict(split.unlabeled_X) == split.hidden_labels)
    assert acc > 0.3
    assert len(est.adapt_result_.round_records) == 2


def test_adapt_unsupervised_path():
    source, target, split = small_problem(seed=7)
    est = small_estimator(random_state=7).fit(source.features, source.labels)
    est.adapt(split.unlabeled_X)
    assert est.model_.classifier_frozen
    rows = [r for r in est.adapt_result_.metrics if r.split == "val"]
    assert rows == []  # no validation data was supplied
