import numpy as np
import pytest

from uidm import autodiff as ad
from uidm import network as net
from uidm.errors import ConfigError, DimensionError

from test_autodiff import check_grads


def small_config(**overrides):
    cfg = dict(input_dim=3, num_classes=4, hidden_dims=(8, 8),
               bottleneck_dim=5, dropout_rate=0.5, classifier_temperature=0.05)
    cfg.update(overrides)
    return net.ModelConfig(**cfg)


def test_init_empty_hidden_dims_single_linear_layer():
    cfg = small_config(hidden_dims=())
    model = net.init_model(cfg, np.random.default_rng(0))
    assert len(model.encoder_layers) == 1
    assert model.encoder_layers[0][0].shape == (3, 5)
    assert model.classifier_weight.shape == (4, 5)
    assert model.classifier_frozen is False


def test_init_same_seed_identical_weights():
    cfg = small_config()
    m1 = net.init_model(cfg, np.random.default_rng(42))
    m2 = net.init_model(cfg, np.random.default_rng(42))
    for (w1, b1), (w2, b2) in zip(m1.encoder_layers, m2.encoder_layers):
        np.testing.assert_array_equal(w1.data, w2.data)
        np.testing.assert_array_equal(b1.data, b2.data)
    np.testing.assert_array_equal(m1.classifier_weight.data, m2.classifier_weight.data)


def test_init_weights_within_glorot_bound():
    cfg = small_config()
    model = net.init_model(cfg, np.random.default_rng(1))
    dims = [3, 8, 8, 5]
    for (w, b), fan_in, fan_out in zip(model.encoder_layers, dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.abs(w.data).max() <= bound
        np.testing.assert_array_equal(b.data, 0.0)
    cls_bound = np.sqrt(6.0 / (4 + 5))
    assert np.abs(model.classifier_weight.data).max() <= cls_bound


def test_invalid_config_raises():
    with pytest.raises(ConfigError):
        small_config(dropout_rate=1.0)
    with pytest.raises(ConfigError):
        small_config(classifier_temperature=0.0)
    with pytest.raises(ConfigError):
        small_config(input_dim=0)


def test_encode_deterministic_without_dropout():
    model = net.init_model(small_config(), np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(6, 3))
    f1 = net.encode(model, x, dropout_active=False)
    f2 = net.encode(model, x, dropout_active=False)
    np.testing.assert_array_equal(f1.data, f2.data)


def test_encode_rows_unit_norm():
    model = net.init_model(small_config(), np.random.default_rng(0))
    x = np.random.default_rng(2).normal(size=(10, 3))
    f = net.encode(model, x)
    np.testing.assert_allclose(np.linalg.norm(f.data, axis=1), 1.0, atol=1e-9)


def test_encode_dropout_draws_distinct_features():
    model = net.init_model(small_config(), np.random.default_rng(0))
    x = np.random.default_rng(3).normal(size=(8, 3))
    rng = np.random.default_rng(7)
    outs = [net.encode(model, x, dropout_active=True, rng=rng).data for _ in range(5)]
    for i in range(5):
        for j in range(i + 1, 5):
            assert not np.array_equal(outs[i], outs[j])


def test_encode_dim_mismatch_raises():
    model = net.init_model(small_config(), np.random.default_rng(0))
    with pytest.raises(DimensionError):
        net.encode(model, np.zeros((4, 7)))


def test_classify_prototype_alignment_wins():
    model = net.init_model(small_config(), np.random.default_rng(5))
    w = model.classifier_weight.data
    w_norm = w / np.linalg.norm(w, axis=1, keepdims=True)
    for k in range(4):
        logits = net.classify(model, w_norm[k:k + 1]).data[0]
        assert np.argmax(logits) == k
        assert logits[k] > np.max(np.delete(logits, k))


def test_classify_argmax_invariant_to_positive_rescaling():
    model = net.init_model(small_config(), np.random.default_rng(6))
    f = np.random.default_rng(8).normal(size=(5, 5))
    base = net.classify(model, f).data
    for c in (1e-3, 0.5, 7.0, 1e3):
        scaled = net.classify(model, c * f).data
        np.testing.assert_array_equal(np.argmax(scaled, axis=1),
                                      np.argmax(base, axis=1))


def test_lower_temperature_sharpens_confidence():
    rng = np.random.default_rng(9)
    sharp = net.init_model(small_config(classifier_temperature=0.05), rng)
    mild = net.init_model(small_config(classifier_temperature=1.0),
                          np.random.default_rng(9))
    np.testing.assert_array_equal(sharp.classifier_weight.data,
                                  mild.classifier_weight.data)
    f = np.random.default_rng(10).normal(size=(16, 5))
    p_sharp = ad.softmax(net.classify(sharp, f)).data
    p_mild = ad.softmax(net.classify(mild, f)).data
    np.testing.assert_array_equal(np.argmax(p_sharp, axis=1),
                                  np.argmax(p_mild, axis=1))
    assert np.all(p_sharp.max(axis=1) > p_mild.max(axis=1))


def test_predict_proba_rows_on_simplex():
    model = net.init_model(small_config(), np.random.default_rng(0))
    x = np.random.default_rng(4).normal(size=(20, 3))
    p = net.predict_proba(model, x).data
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p >= 0.0)


def test_predict_proba_uniform_over_random_inits():
    # Monte-Carlo over fresh inits: class-mean probabilities approach 1/K
    cfg = small_config()
    means = []
    for seed in range(60):
        model = net.init_model(cfg, np.random.default_rng(1000 + seed))
        x = np.random.default_rng(2000 + seed).normal(size=(200, 3))
        means.append(net.predict_proba(model, x).data.mean(axis=0))
    grand = np.mean(means, axis=0)
    np.testing.assert_allclose(grand, 0.25, atol=0.1)


def test_forward_gradients_match_finite_differences():
    model = net.init_model(small_config(dropout_rate=0.0), np.random.default_rng(3))
    x = np.random.default_rng(12).normal(size=(4, 3))
    target = np.random.default_rng(13).uniform(size=(4, 4))
    target /= target.sum(axis=1, keepdims=True)
    t = ad.Tensor(target)

    def build():
        p = net.predict_proba(model, x)
        d = ad.sub(p, t)
        return ad.tmean(ad.mul(d, d))

    check_grads(build, model.all_params())


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = net.init_model(small_config(), np.random.default_rng(0))
    path = tmp_path / "model.npz"
    net.save_checkpoint(model, path)
    loaded = net.load_checkpoint(path)
    x = np.random.default_rng(1).normal(size=(5, 3))
    np.testing.assert_array_equal(net.predict_proba(model, x).data,
                                  net.predict_proba(loaded, x).data)
    for (w1, b1), (w2, b2) in zip(model.encoder_layers, loaded.encoder_layers):
        np.testing.assert_array_equal(w1.data, w2.data)
        np.testing.assert_array_equal(b1.data, b2.data)


def test_checkpoint_frozen_flag_survives(tmp_path):
    model = net.init_model(small_config(), np.random.default_rng(0))
    net.freeze_classifier(model)
    path = tmp_path / "model.npz"
    net.save_checkpoint(model, path)
    loaded = net.load_checkpoint(path)
    assert loaded.classifier_frozen is True
    assert loaded.classifier_weight.requires_grad is False


def test_checkpoint_config_mismatch_raises(tmp_path):
    model = net.init_model(small_config(), np.random.default_rng(0))
    path = tmp_path / "model.npz"
    net.save_checkpoint(model, path)
    with pytest.raises(ConfigError):
        net.load_checkpoint(path, expected_config=small_config(bottleneck_dim=6))


def test_checkpoint_missing_and_corrupt_files(tmp_path):
    with pytest.raises(OSError):
        net.load_checkpoint(tmp_path / "nope.npz")
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a checkpoint at all")
    with pytest.raises(OSError):
        net.load_checkpoint(bad)


def test_freeze_blocks_gradients():
    model = net.init_model(small_config(), np.random.default_rng(0))
    net.freeze_classifier(model)
    x = np.random.default_rng(2).normal(size=(4, 3))
    loss = ad.tmean(net.predict_proba(model, x))
    loss.backward()
    assert model.classifier_weight.grad is None
    assert model.encoder_layers[0][0].grad is not None
