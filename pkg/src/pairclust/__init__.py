"""Deep constrained clustering from incomplete, noisy pairwise annotations.

A softmax-output MLP maps features to cluster memberships and is trained
with a pairwise logistic loss on annotated sample pairs. Annotator confusion
is absorbed by a learnable sigmoid-parameterized interaction matrix, and a
log-determinant volume regularizer on the membership Gram matrix keeps the
solution identifiable under noise. Includes the synthetic data generators,
annotation samplers, evaluation metrics and experiment harness needed to
study the method end to end.
"""

from .datagen import (
    AnnotationSet,
    GroundTruth,
    annotation_error_rate,
    default_confusion_k3,
    inverse_feature_map_k3,
    machine_annotate,
    sample_annotations,
    synth_generate,
)
from .evaluate import (
    EvalReport,
    aligned_mse,
    check_asc,
    check_ssc_sampled,
    clustering_metrics,
    evaluate_model,
    hungarian,
    kmeans_reference,
)
from .loss import LossValue, PairBatch, grad_bprime, loss_cc, loss_vol
from .model import (
    MlpParams,
    b_matrix,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    TrainConfig,
    TrainLog,
    pair_loss_value,
    select_lambda,
    split_validation,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationSet",
    "EvalReport",
    "GroundTruth",
    "LossValue",
    "MlpParams",
    "PairBatch",
    "TrainConfig",
    "TrainLog",
    "aligned_mse",
    "annotation_error_rate",
    "b_matrix",
    "backward",
    "check_asc",
    "check_ssc_sampled",
    "clustering_metrics",
    "default_confusion_k3",
    "evaluate_model",
    "forward",
    "grad_bprime",
    "hungarian",
    "init_params",
    "inverse_feature_map_k3",
    "kmeans_reference",
    "load_checkpoint",
    "loss_cc",
    "loss_vol",
    "machine_annotate",
    "pair_loss_value",
    "sample_annotations",
    "save_checkpoint",
    "select_lambda",
    "split_validation",
    "synth_generate",
    "train",
]
