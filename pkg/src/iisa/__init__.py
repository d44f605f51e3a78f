"""Platform and toolkit for image intrinsic scale assessment: subjective
annotation studies, opinion aggregation, weak-label generation, and predictor
evaluation."""

from .iis import (
    SCALE_LOWER_BOUND,
    WeakLabel,
    WeakLabelConfig,
    extrapolate_iis,
    generate_weak_labels,
    sample_weak_scales,
)
from .resample import Image, ResampleSpec, downscale, kernel_value
from .stats import (
    MetricReport,
    MoisRecord,
    Opinion,
    bootstrap_ci,
    geometric_mean,
    intergroup_agreement,
    mae,
    plcc,
    rmse,
    srcc,
)
from .study import StudyConfig, StudyEngine, TrainingItem, slider_to_scale

__all__ = [
    "SCALE_LOWER_BOUND",
    "Image",
    "MetricReport",
    "MoisRecord",
    "Opinion",
    "ResampleSpec",
    "StudyConfig",
    "StudyEngine",
    "TrainingItem",
    "WeakLabel",
    "WeakLabelConfig",
    "bootstrap_ci",
    "downscale",
    "extrapolate_iis",
    "generate_weak_labels",
    "geometric_mean",
    "intergroup_agreement",
    "kernel_value",
    "mae",
    "plcc",
    "rmse",
    "sample_weak_scales",
    "slider_to_scale",
    "srcc",
]

__version__ = "0.1.0"
