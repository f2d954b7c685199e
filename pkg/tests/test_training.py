import numpy as np
import pytest
from test_autodiff import check_grads

from uidm.autodiff import Tensor, softmax
from uidm.datasets import make_blobs_shift, ssda_split
from uidm.errors import ConfigError, NumericError
from uidm.mixup import MixupConfig
from uidm.network import ModelConfig, init_model, predict_proba
from uidm.training import (
    BASELINE_KINDS,
    MetricRow,
    SGD,
    TrainConfig,
    adapt_uidm,
    adapt_uidm_unsupervised,
    cross_entropy_loss,
    evaluate,
    metrics_to_csv,
    mse_consistency_loss,
    one_hot,
    prediction_entropy,
    pretrain,
    run_baseline,
    selection_accuracy,
)
from uidm.uncertainty import UncertaintyConfig

LN2 = 0.6931471805599453


# -- shared tiny problem --------------------------------------------------------


def tiny_problem(seed=0, k=3, shots=1):
    source, target = make_blobs_shift(K=k, n_per_class=40, d=2,
                                      shift_scale=0.8, spread=0.35, seed=seed)
    split = ssda_split(target, shots=shots, val_per_class=3, seed=seed)
    return source, target, split


def tiny_model_config(k=3):
    return ModelConfig(input_dim=2, num_classes=k, hidden_dims=(16,),
                       bottleneck_dim=8, dropout_rate=0.25)


def tiny_train_config(**overrides):
    base = dict(outer_rounds=2, inner_steps=5, batch_size=16, max_epochs=30,
                patience=5, alpha=20.0, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


def pretrained(seed=0):
    source, _, split = tiny_problem(seed=seed)
    result = pretrain(source, tiny_model_config(), tiny_train_config(seed=seed))
    return result.model, split


# -- helpers and losses ---------------------------------------------------------


def test_one_hot_rows():
    got = one_hot(np.array([2, 0, 1]), 3)
    assert np.array_equal(got, np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]]))


def test_one_hot_rejects_out_of_range():
    with pytest.raises(ConfigError):
        one_hot(np.array([0, 3]), 3)


def test_cross_entropy_uniform_logits_is_log_k():
    logits = Tensor(np.zeros((4, 5)))
    targets = one_hot(np.array([0, 1, 2, 3]), 5)
    loss = cross_entropy_loss(logits, targets)
    assert abs(float(loss.data) - np.log(5)) < 1e-12


def test_cross_entropy_frozen_binary_value():
    loss = cross_entropy_loss(Tensor(np.array([[0.5, 0.5]])),
                              np.array([[1.0, 0.0]]), from_logits=False)
    assert abs(float(loss.data) - LN2) < 1e-12


def test_cross_entropy_confident_correct_is_small():
    logits = Tensor(np.array([[30.0, 0.0, 0.0]]))
    loss = cross_entropy_loss(logits, one_hot(np.array([0]), 3))
    assert float(loss.data) < 1e-9


def test_cross_entropy_gradient():
    rng = np.random.default_rng(0)
    logits = Tensor(rng.normal(size=(6, 4)), requires_grad=True)
    targets = rng.dirichlet(np.ones(4), size=6)
    check_grads(lambda: cross_entropy_loss(logits, targets), [logits])


def test_cross_entropy_shape_mismatch():
    with pytest.raises(ConfigError):
        cross_entropy_loss(Tensor(np.zeros((2, 3))), np.zeros((2, 4)))


def test_mse_consistency_frozen_value():
    loss = mse_consistency_loss(Tensor(np.array([[1.0, 0.0]])),
                                np.array([[0.0, 1.0]]))
    assert float(loss.data) == 2.0


def test_mse_consistency_batch_mean():
    probs = Tensor(np.array([[1.0, 0.0], [0.5, 0.5]]))
    targets = np.array([[0.0, 1.0], [0.5, 0.5]])
    assert abs(float(mse_consistency_loss(probs, targets).data) - 1.0) < 1e-12


def test_mse_consistency_gradient():
    rng = np.random.default_rng(1)
    logits = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    targets = rng.dirichlet(np.ones(3), size=5)
    check_grads(
        lambda: mse_consistency_loss(softmax(logits), targets), [logits])


def test_prediction_entropy_uniform():
    probs = Tensor(np.full((3, 4), 0.25))
    assert abs(float(prediction_entropy(probs).data) - np.log(4)) < 1e-12


def test_prediction_entropy_gradient():
    rng = np.random.default_rng(2)
    logits = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    check_grads(lambda: prediction_entropy(softmax(logits)), [logits])


# -- optimizer -------------------------------------------------------------------


def test_sgd_momentum_hand_computed():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = SGD([(p, 0.1)], momentum=0.9)
    p.grad = np.array([0.5])
    opt.step()
    assert abs(p.data[0] - 0.95) < 1e-15
    assert p.grad is None
    p.grad = np.array([0.5])
    opt.step()
    assert abs(p.data[0] - 0.855) < 1e-15


def test_sgd_skips_frozen_and_gradless():
    frozen = Tensor(np.array([2.0]), requires_grad=False)
    idle = Tensor(np.array([3.0]), requires_grad=True)
    opt = SGD([(frozen, 0.1), (idle, 0.1)], momentum=0.0)
    frozen.grad = np.array([1.0])
    opt.step()
    assert frozen.data[0] == 2.0
    assert idle.data[0] == 3.0


# -- evaluate --------------------------------------------------------------------


def test_evaluate_matches_manual_argmax():
    model = init_model(tiny_model_config(), np.random.default_rng(3))
    X = np.random.default_rng(4).normal(size=(20, 2))
    y = np.random.default_rng(5).integers(0, 3, size=20)
    preds = np.argmax(predict_proba(model, X).data, axis=1)
    assert evaluate(model, X, y) == pytest.approx(np.mean(preds == y))


# -- pretrain --------------------------------------------------------------------


def test_pretrain_learns_separable_source():
    source, _, _ = tiny_problem(seed=1)
    result = pretrain(source, tiny_model_config(), tiny_train_config(seed=1))
    assert result.val_accuracy >= 0.9
    assert evaluate(result.model, source.features, source.labels) >= 0.9


def test_pretrain_deterministic():
    source, _, _ = tiny_problem(seed=2)
    a = pretrain(source, tiny_model_config(), tiny_train_config(seed=2))
    b = pretrain(source, tiny_model_config(), tiny_train_config(seed=2))
    for pa, pb in zip(a.model.all_params(), b.model.all_params()):
        assert np.array_equal(pa.data, pb.data)
    assert [(r.round, r.value) for r in a.metrics] == \
           [(r.round, r.value) for r in b.metrics]


def test_pretrain_metrics_schema():
    source, _, _ = tiny_problem(seed=3)
    result = pretrain(source, tiny_model_config(),
                      tiny_train_config(seed=3, max_epochs=5, patience=5))
    epochs = {r.round for r in result.metrics}
    assert epochs == set(range(5))
    for r in result.metrics:
        assert (r.split, r.metric) in {("train", "loss"), ("val", "accuracy")}


def test_pretrain_respects_patience():
    source, _, _ = tiny_problem(seed=4)
    result = pretrain(source, tiny_model_config(),
                      tiny_train_config(seed=4, max_epochs=200, patience=3))
    n_epochs = max(r.round for r in result.metrics) + 1
    assert n_epochs < 200


# -- adaptation ------------------------------------------------------------------


def test_adapt_freezes_classifier_bit_exact():
    model, split = pretrained(seed=5)
    before = model.classifier_weight.data.copy()
    result = adapt_uidm(model, split, tiny_train_config(seed=5),
                        UncertaintyConfig(snpc=3), MixupConfig())
    assert np.array_equal(result.model.classifier_weight.data, before)
    assert result.model.classifier_frozen
    assert not result.model.classifier_weight.requires_grad
    # the input model is untouched, encoder included
    assert np.array_equal(model.classifier_weight.data, before)
    assert not model.classifier_frozen


def test_adapt_changes_encoder():
    model, split = pretrained(seed=6)
    result = adapt_uidm(model, split, tiny_train_config(seed=6),
                        UncertaintyConfig(snpc=3), MixupConfig())
    moved = any(
        not np.array_equal(pa.data, pb.data)
        for pa, pb in zip(model.encoder_params(), result.model.encoder_params()))
    assert moved


def test_adapt_deterministic():
    model, split = pretrained(seed=7)
    a = adapt_uidm(model, split, tiny_train_config(seed=7),
                   UncertaintyConfig(snpc=3), MixupConfig())
    b = adapt_uidm(model, split, tiny_train_config(seed=7),
                   UncertaintyConfig(snpc=3), MixupConfig())
    for pa, pb in zip(a.model.all_params(), b.model.all_params()):
        assert np.array_equal(pa.data, pb.data)
    assert [(r.round, r.step, r.split, r.metric, r.value) for r in a.metrics] \
        == [(r.round, r.step, r.split, r.metric, r.value) for r in b.metrics]


def test_adapt_metrics_and_records_shape():
    model, split = pretrained(seed=8)
    cfg = tiny_train_config(seed=8)
    result = adapt_uidm(model, split, cfg, UncertaintyConfig(snpc=3),
                        MixupConfig())
    assert len(result.round_records) == cfg.outer_rounds
    loss_rows = [r for r in result.metrics if r.metric == "loss"]
    assert len(loss_rows) == cfg.outer_rounds * cfg.inner_steps
    for split_name in ("val", "unlabeled"):
        acc_rows = [r for r in result.metrics if r.split == split_name]
        assert len(acc_rows) == cfg.outer_rounds
    assert np.isfinite(result.final_accuracy("unlabeled"))


def test_wo_selection_baseline_is_snpc_zero_path():
    model, split = pretrained(seed=9)
    cfg = tiny_train_config(seed=9)
    base = run_baseline("uidm_wo_selection", model, split, cfg,
                        UncertaintyConfig(snpc=3), MixupConfig())
    direct = adapt_uidm(model, split, cfg, UncertaintyConfig(snpc=0),
                        MixupConfig())
    for pa, pb in zip(base.model.all_params(), direct.model.all_params()):
        assert np.array_equal(pa.data, pb.data)
    assert [(r.value) for r in base.metrics] == [(r.value) for r in direct.metrics]
    assert all(rec.selection.num_selected == 0 for rec in base.round_records)


def test_source_only_baseline_keeps_weights():
    model, split = pretrained(seed=10)
    result = run_baseline("source_only", model, split, tiny_train_config())
    for pa, pb in zip(model.all_params(), result.model.all_params()):
        assert np.array_equal(pa.data, pb.data)
    assert {(r.split, r.metric) for r in result.metrics} == {
        ("val", "accuracy"), ("unlabeled", "accuracy")}


def test_all_baseline_kinds_run():
    model, split = pretrained(seed=11)
    cfg = tiny_train_config(seed=11, outer_rounds=1, inner_steps=3)
    for kind in BASELINE_KINDS:
        result = run_baseline(kind, model, split, cfg,
                              UncertaintyConfig(snpc=2), MixupConfig())
        assert 0.0 <= result.final_accuracy("unlabeled") <= 1.0


def test_unknown_baseline_kind_raises():
    model, split = pretrained(seed=12)
    with pytest.raises(ConfigError, match="unknown baseline"):
        run_baseline("oracle", model, split, tiny_train_config())


def test_unsupervised_needs_selection():
    model, split = pretrained(seed=13)
    with pytest.raises(ConfigError, match="snpc"):
        adapt_uidm_unsupervised(model, split, tiny_train_config(),
                                UncertaintyConfig(snpc=0))


def test_unsupervised_runs_without_labeled_shots():
    model, split = pretrained(seed=14)
    cfg = tiny_train_config(seed=14, outer_rounds=1, inner_steps=3)
    result = adapt_uidm_unsupervised(model, split, cfg,
                                     UncertaintyConfig(snpc=3))
    assert len(result.round_records) == 1
    assert 0.0 <= result.final_accuracy("unlabeled") <= 1.0


def test_adapt_poisoned_model_raises_numeric_error():
    model, split = pretrained(seed=15)
    model.encoder_layers[0][0].data[:] = np.nan
    with pytest.raises(NumericError):
        adapt_uidm(model, split, tiny_train_config(seed=15),
                   UncertaintyConfig(snpc=2), MixupConfig())


def test_selection_accuracy_helper():
    from uidm.uncertainty import PoolScores, SelectionResult
    from uidm.training import RoundRecord

    scores = PoolScores(
        soft_labels=np.eye(2)[[0, 0, 1, 1]],
        entropies=np.zeros(4),
        predicted=np.array([0, 0, 1, 1]),
    )
    sel = SelectionResult(
        selected_idx=np.array([0, 2]),
        selected_labels=np.eye(2)[[0, 1]],
        rest_idx=np.array([1, 3]),
        rest_labels=np.eye(2)[[0, 1]],
    )
    record = RoundRecord(0, scores, sel)
    sel_acc, pool_acc = selection_accuracy(record, np.array([0, 1, 1, 0]))
    assert sel_acc == 1.0
    assert pool_acc == 0.5


# -- metric serialization --------------------------------------------------------


def test_metrics_csv_layout_and_determinism(tmp_path):
    rows = [MetricRow(0, 0, "train", "loss", 1.5),
            MetricRow(0, 5, "val", "accuracy", 1 / 3)]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    metrics_to_csv(rows, p1)
    metrics_to_csv(rows, p2)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0] == "round,step,split,metric,value"
    assert lines[1] == "0,0,train,loss,1.5"
    assert lines[2] == "0,5,val,accuracy,0.3333333333333333"
