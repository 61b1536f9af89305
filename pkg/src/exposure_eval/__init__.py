"""Exposure-aware evaluation and dataset tooling for night-time scene parsing."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .annotation import ConsensusDecision, DisagreementStats, disagreement_stats, merge_annotations
from .egl_ref import EglParams, LossWeights, combined_loss, egl_backward, egl_forward
from .errors import (
    ConfigError,
    DomainError,
    ExposureEvalError,
    GradientCheckError,
    LabelFormatError,
    MetricUndefinedError,
    ShapeError,
)
from .exposure import ExposureBins, ExposureMap, RgbImage, bin_index, exposure_histogram, exposure_map
from .labels import INVALID, LabelMap, decode_label_png, encode_label_png, resize_labels
from .metrics import EvalReport, GroupedConfusion, accumulate, ef1, evaluate, iou
from .stats import DatasetIndex, class_distribution, invalid_ratio, stratified_split

__all__ = [
    "BACKEND",
    "INVALID",
    "ConfigError",
    "ConsensusDecision",
    "DatasetIndex",
    "DisagreementStats",
    "DomainError",
    "EglParams",
    "EvalReport",
    "ExposureBins",
    "ExposureEvalError",
    "ExposureMap",
    "GradientCheckError",
    "GroupedConfusion",
    "LabelFormatError",
    "LabelMap",
    "LossWeights",
    "MetricUndefinedError",
    "RgbImage",
    "ShapeError",
    "accumulate",
    "bin_index",
    "class_distribution",
    "combined_loss",
    "decode_label_png",
    "disagreement_stats",
    "ef1",
    "egl_backward",
    "egl_forward",
    "encode_label_png",
    "evaluate",
    "exposure_histogram",
    "exposure_map",
    "invalid_ratio",
    "iou",
    "merge_annotations",
    "resize_labels",
    "stratified_split",
]
