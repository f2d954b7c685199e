"""Encoder + frozen-classifier model.

The encoder is a small MLP: hidden layers with ReLU and dropout, a linear
bottleneck, and L2 row normalization of the output features. The classifier
is a single weight matrix whose rows act as class prototypes; logits are
cosine similarities divided by a temperature. During target adaptation the
classifier is frozen and only encoder parameters move.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DimensionError

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    num_classes: int
    hidden_dims: tuple = (64, 64)
    bottleneck_dim: int = 32
    dropout_rate: float = 0.5
    classifier_temperature: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.bottleneck_dim < 1:
            raise ConfigError(f"bottleneck_dim must be >= 1, got {self.bottleneck_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError(f"hidden_dims must all be >= 1, got {self.hidden_dims}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}"
            )
        if self.classifier_temperature <= 0.0:
            raise ConfigError(
                "classifier_temperature must be > 0, "
                f"got {self.classifier_temperature}"
            )


@dataclass
class Model:
    config: ModelConfig
    encoder_layers: list = field(default_factory=list)  # [(weight, bias), ...]
    classifier_weight: Tensor = None
    classifier_frozen: bool = False

    def encoder_params(self):
        params = []
        for w, b in self.encoder_layers:
            params.extend([w, b])
        return params

    def all_params(self):
        return self.encoder_params() + [self.classifier_weight]


def _glorot_uniform(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_model(config: ModelConfig, rng: np.random.Generator) -> Model:
    """Build a model with scaled-uniform weights and zero biases."""
    dims = [config.input_dim, *config.hidden_dims, config.bottleneck_dim]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = Tensor(_glorot_uniform(rng, fan_in, fan_out), requires_grad=True)
        b = Tensor(np.zeros(fan_out), requires_grad=True)
        layers.append((w, b))
    cls = Tensor(
        _glorot_uniform(rng, config.num_classes, config.bottleneck_dim),
        requires_grad=True,
    )
    return Model(config=config, encoder_layers=layers, classifier_weight=cls)


def freeze_classifier(model: Model) -> None:
    """Stop the classifier from receiving gradients or optimizer updates."""
    model.classifier_frozen = True
    model.classifier_weight.requires_grad = False


def copy_model(model: Model) -> Model:
    """Independent copy: fresh parameter tensors, same values and flags."""
    layers = []
    for w, b in model.encoder_layers:
        layers.append((Tensor(w.data.copy(), requires_grad=w.requires_grad),
                       Tensor(b.data.copy(), requires_grad=b.requires_grad)))
    cls = Tensor(model.classifier_weight.data.copy(),
                 requires_grad=model.classifier_weight.requires_grad)
    return Model(config=model.config, encoder_layers=layers,
                 classifier_weight=cls,
                 classifier_frozen=model.classifier_frozen)


def encode(model: Model, x, dropout_active: bool = False,
           rng: np.random.Generator | None = None) -> Tensor:
    """Forward through the encoder; output rows have unit L2 norm."""
    if not isinstance(x, Tensor):
        x = Tensor(np.atleast_2d(x))
    if x.data.ndim != 2 or x.data.shape[1] != model.config.input_dim:
        raise DimensionError(
            f"encode: expected (B, {model.config.input_dim}) input, "
            f"got {x.data.shape}"
        )
    if dropout_active and rng is None:
        raise ConfigError("encode: dropout_active requires an rng")
    h = x
    n_layers = len(model.encoder_layers)
    for i, (w, b) in enumerate(model.encoder_layers):
        h = ad.add(ad.matmul(h, w), b)
        if i < n_layers - 1:  # bottleneck layer stays linear
            h = ad.relu(h)
            h = ad.dropout(h, model.config.dropout_rate, dropout_active, rng)
    return ad.l2_normalize_rows(h)


def classify(model: Model, features: Tensor) -> Tensor:
    """Cosine logits: normalized features times normalized prototype rows.

    Features are re-normalized here, so positively rescaling them cannot
    change the argmax.
    """
    if not isinstance(features, Tensor):
        features = Tensor(np.atleast_2d(features))
    if features.data.ndim != 2 or features.data.shape[1] != model.config.bottleneck_dim:
        raise DimensionError(
            f"classify: expected (B, {model.config.bottleneck_dim}) features, "
            f"got {features.data.shape}"
        )
    f = ad.l2_normalize_rows(features)
    w = ad.l2_normalize_rows(model.classifier_weight)
    cos = ad.matmul(f, ad.transpose(w))
    return ad.scale(cos, 1.0 / model.config.classifier_temperature)


def predict_proba(model: Model, x, dropout_active: bool = False,
                  rng: np.random.Generator | None = None) -> Tensor:
    """Class probabilities softmax(classify(encode(x)))."""
    return ad.softmax(classify(model, encode(model, x, dropout_active, rng)))


# -- checkpointing -----------------------------------------------------------


def save_checkpoint(model: Model, path) -> None:
    """Write config echo plus all weight arrays; float64 bit-exact."""
    arrays = {
        "format_version": np.asarray(CHECKPOINT_FORMAT_VERSION),
        "config_json": np.asarray(json.dumps(asdict(model.config))),
        "classifier_frozen": np.asarray(int(model.classifier_frozen)),
        "classifier_weight": model.classifier_weight.data,
    }
    for i, (w, b) in enumerate(model.encoder_layers):
        arrays[f"encoder_{i}_weight"] = w.data
        arrays[f"encoder_{i}_bias"] = b.data
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path, expected_config: ModelConfig | None = None) -> Model:
    """Rebuild a model from ``save_checkpoint`` output.

    Raises OSError for missing/corrupt files and ConfigError when the stored
    config disagrees with ``expected_config`` (no partial state either way).
    """
    try:
        with np.load(path, allow_pickle=False) as archive:
            data = {k: archive[k] for k in archive.files}
    except FileNotFoundError:
        raise
    except (zipfile.BadZipFile, ValueError, KeyError, EOFError) as e:
        raise OSError(f"corrupt checkpoint {path}: {e}") from e
    try:
        version = int(data["format_version"])
        if version != CHECKPOINT_FORMAT_VERSION:
            raise OSError(
                f"checkpoint {path} has format version {version}, "
                f"expected {CHECKPOINT_FORMAT_VERSION}"
            )
        cfg_dict = json.loads(str(data["config_json"]))
        config = ModelConfig(**cfg_dict)
        if expected_config is not None and config != expected_config:
            raise ConfigError(
                f"checkpoint config {config} does not match expected "
                f"{expected_config}"
            )
        n_layers = len(config.hidden_dims) + 1
        layers = []
        for i in range(n_layers):
            w = Tensor(data[f"encoder_{i}_weight"], requires_grad=True)
            b = Tensor(data[f"encoder_{i}_bias"], requires_grad=True)
            layers.append((w, b))
        model = Model(
            config=config,
            encoder_layers=layers,
            classifier_weight=Tensor(data["classifier_weight"], requires_grad=True),
        )
    except (ConfigError, OSError):
        raise
    except Exception as e:
        raise OSError(f"corrupt checkpoint {path}: {e}") from e
    if bool(int(data["classifier_frozen"])):
        freeze_classifier(model)
    return model
