"""JSON experiment configs: strict parsing, defaulting, and echoing.

Unknown sections or fields are rejected by name so silent typos cannot
change an experiment. The resolved config serializes canonically (sorted
keys) and hashes together with the seed into a short run id.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json

from . import fixtures
from .datasets import make_blobs_shift, make_two_moons_shift
from .errors import ConfigError
from .mixup import MixupConfig
from .network import ModelConfig
from .training import TrainConfig
from .uncertainty import UncertaintyConfig

_DATA_DEFAULTS = {
    "blobs": {
        "generator": "blobs",
        "K": fixtures.BENCHMARK_K,
        "n_per_class": fixtures.BENCHMARK_N_PER_CLASS,
        "d": fixtures.BENCHMARK_DIM,
        "shift_scale": fixtures.BENCHMARK_SHIFT_SCALE,
        "spread": fixtures.BENCHMARK_SPREAD,
        "seed": fixtures.BENCHMARK_DATA_SEED,
    },
    "two_moons": {
        "generator": "two_moons",
        "n_per_domain": 400,
        "rotation_deg": 30.0,
        "noise_sd": 0.1,
        "translate": [0.0, 0.0],
        "seed": fixtures.BENCHMARK_DATA_SEED,
    },
}

# train/uncertainty/mixup defaults mirror the dataclass defaults; the seed
# comes from the command line and the scoring augment strength is shared
# with training
_TRAIN_DEFAULTS = {k: v for k, v in
                   dataclasses.asdict(TrainConfig()).items() if k != "seed"}
_UNCERTAINTY_DEFAULTS = {
    k: v for k, v in dataclasses.asdict(UncertaintyConfig()).items()
    if k != "augment_strength"}
_MIXUP_DEFAULTS = dataclasses.asdict(MixupConfig())
_MODEL_DEFAULTS = {
    "hidden_dims": [32],
    "bottleneck_dim": 16,
    "dropout_rate": 0.4,
    "classifier_temperature": 0.05,
}
_SPLIT_DEFAULTS = {"shots": 1, "val_per_class": 3}

_SECTIONS = ("data", "model", "train", "uncertainty", "mixup", "split")


def _merge_section(name: str, defaults: dict, given: dict) -> dict:
    for field in given:
        if field not in defaults:
            raise ConfigError(
                f"unknown field {name}.{field!r}; known fields: "
                f"{sorted(defaults)}")
    merged = dict(defaults)
    merged.update(given)
    return merged


def resolve_config(raw: dict) -> dict:
    """Fill defaults and reject unknown sections/fields by name."""
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be an object, got {type(raw).__name__}")
    for section in raw:
        if section not in _SECTIONS:
            raise ConfigError(
                f"unknown config section {section!r}; known sections: "
                f"{list(_SECTIONS)}")
    data_given = raw.get("data", {})
    generator = data_given.get("generator", "blobs")
    if generator not in _DATA_DEFAULTS:
        raise ConfigError(
            f"unknown data.generator {generator!r}; "
            f"expected one of {sorted(_DATA_DEFAULTS)}")
    resolved = {
        "data": _merge_section("data", _DATA_DEFAULTS[generator], data_given),
        "model": _merge_section("model", _MODEL_DEFAULTS, raw.get("model", {})),
        "train": _merge_section("train", _TRAIN_DEFAULTS, raw.get("train", {})),
        "uncertainty": _merge_section("uncertainty", _UNCERTAINTY_DEFAULTS,
                                      raw.get("uncertainty", {})),
        "mixup": _merge_section("mixup", _MIXUP_DEFAULTS, raw.get("mixup", {})),
        "split": _merge_section("split", _SPLIT_DEFAULTS, raw.get("split", {})),
    }
    if resolved["split"]["shots"] not in (1, 3):
        raise ConfigError(
            f"split.shots must be 1 or 3, got {resolved['split']['shots']}")
    return resolved


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return resolve_config(raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def config_run_id(config: dict, seed: int) -> str:
    digest = hashlib.sha256(
        (canonical_json(config) + str(seed)).encode()).hexdigest()
    return digest[:12]


# -- object assembly -----------------------------------------------------------


def build_datasets(config: dict):
    d = config["data"]
    if d["generator"] == "blobs":
        return make_blobs_shift(K=d["K"], n_per_class=d["n_per_class"],
                                d=d["d"], shift_scale=d["shift_scale"],
                                spread=d["spread"], seed=d["seed"])
    return make_two_moons_shift(n_per_domain=d["n_per_domain"],
                                rotation_deg=d["rotation_deg"],
                                noise_sd=d["noise_sd"],
                                translate=tuple(d["translate"]),
                                seed=d["seed"])


def _coerce(builder, section: str, **kwargs):
    try:
        return builder(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad {section} section: {exc}") from exc


def build_model_config(config: dict) -> ModelConfig:
    d = config["data"]
    if d["generator"] == "blobs":
        input_dim, num_classes = d["d"], d["K"]
    else:
        input_dim, num_classes = 2, 2
    m = config["model"]
    return _coerce(ModelConfig, "model", input_dim=input_dim,
                   num_classes=num_classes,
                   hidden_dims=tuple(m["hidden_dims"]),
                   bottleneck_dim=m["bottleneck_dim"],
                   dropout_rate=m["dropout_rate"],
                   classifier_temperature=m["classifier_temperature"])


def build_train_config(config: dict, seed: int) -> TrainConfig:
    return _coerce(TrainConfig, "train", seed=seed, **config["train"])


def build_uncertainty_config(config: dict) -> UncertaintyConfig:
    return _coerce(UncertaintyConfig, "uncertainty",
                   augment_strength=config["train"]["augment_strength"],
                   **config["uncertainty"])


def build_mixup_config(config: dict) -> MixupConfig:
    return _coerce(MixupConfig, "mixup", **config["mixup"])
