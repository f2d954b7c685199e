"""Source-free semi-supervised domain adaptation with uncertainty-guided mixup."""

from .datasets import (
    Dataset,
    TargetSplit,
    augment,
    augment_batch,
    load_csv,
    make_blobs_shift,
    make_two_moons_shift,
    save_csv,
    ssda_split,
)
from .errors import ConfigError, DimensionError, NumericError
from .estimator import UidmClassifier
from .mixup import MixupConfig, hybrid_mixup, mix_pair, sample_lambda, self_mixup
from .network import (
    Model,
    ModelConfig,
    copy_model,
    freeze_classifier,
    init_model,
    load_checkpoint,
    predict_proba,
    save_checkpoint,
)
from .training import (
    BASELINE_KINDS,
    AdaptResult,
    PretrainResult,
    TrainConfig,
    adapt_uidm,
    adapt_uidm_unsupervised,
    pretrain,
    run_baseline,
    selection_accuracy,
)
from .uncertainty import (
    PoolScores,
    SelectionResult,
    UncertaintyConfig,
    entropy,
    estimate_soft_labels,
    score_pool,
    source_like_select,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptResult",
    "BASELINE_KINDS",
    "ConfigError",
    "Dataset",
    "DimensionError",
    "MixupConfig",
    "Model",
    "ModelConfig",
    "NumericError",
    "PoolScores",
    "PretrainResult",
    "SelectionResult",
    "TargetSplit",
    "TrainConfig",
    "UidmClassifier",
    "UncertaintyConfig",
    "adapt_uidm",
    "adapt_uidm_unsupervised",
    "augment",
    "augment_batch",
    "copy_model",
    "entropy",
    "estimate_soft_labels",
    "freeze_classifier",
    "hybrid_mixup",
    "init_model",
    "load_checkpoint",
    "load_csv",
    "make_blobs_shift",
    "make_two_moons_shift",
    "mix_pair",
    "predict_proba",
    "pretrain",
    "run_baseline",
    "sample_lambda",
    "save_checkpoint",
    "save_csv",
    "score_pool",
    "selection_accuracy",
    "self_mixup",
    "source_like_select",
    "ssda_split",
]
