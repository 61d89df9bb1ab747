"""Post-hoc risk control for multiclass semantic segmentation.

Turn per-pixel softmax scores into multi-labeled prediction masks whose
expected loss on exchangeable data is provably at most a user-chosen
level alpha. The workflow: calibrate a coverage parameter on held-out
scored images, apply it at inference, then inspect validity metrics and
uncertainty heatmaps.
"""

from .calibration import (
    CalibrationArtifact,
    CalibrationConfig,
    calibrate,
    crc_condition,
    empirical_risk,
    feasibility_check,
    min_feasible_alpha,
    min_feasible_n,
)
from .errors import (
    BadMagic,
    CrcsegError,
    DataSizeError,
    DegenerateSplit,
    DimensionMismatch,
    EmptyCalibrationSet,
    FormatError,
    FortranOrderUnsupported,
    HeaderParseError,
    ImageFormatError,
    InfeasibleAlpha,
    InvalidMultiMask,
    LabelOutOfRange,
    ManifestError,
    NpyFormatError,
    ReportConfigMismatch,
    ShapeRankError,
    SoftmaxValidationError,
    UnsupportedDescriptor,
    UnsupportedVersion,
    ValidationError,
    ZeroValidPixels,
)
from .heatmap import HeatmapOptions, black_out, intensity_map, overlay, render
from .lac import lac_set, set_size_map, threshold_indicator
from .losses import (
    LossSpec,
    binary,
    binary_threshold,
    coverage_ratio,
    image_loss,
    loss_binary,
    loss_binary_threshold,
    loss_miscoverage,
    loss_weighted_miscoverage,
    miscoverage,
    weighted_miscoverage,
)
from .manifest import ManifestEntry, SplitSpec, read_manifest, resolve_paths, split, write_manifest
from .metrics import EvaluationReport, activation_ratio, aggregate_runs, evaluate
from .npyio import (
    read_mask,
    read_multimask,
    read_scores,
    write_mask,
    write_multimask,
    write_scores,
)
from .synth import (
    SynthConfig,
    TrialSummary,
    generate,
    trial_seed,
    validate_guarantee,
    write_dataset,
)
from .types import Dims, GroundTruthMask, MultiMask, ScoreTensor, mask_contains, one_hot

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Dims",
    "ScoreTensor",
    "GroundTruthMask",
    "MultiMask",
    "one_hot",
    "mask_contains",
    "threshold_indicator",
    "lac_set",
    "set_size_map",
    "LossSpec",
    "binary",
    "binary_threshold",
    "miscoverage",
    "weighted_miscoverage",
    "coverage_ratio",
    "loss_binary",
    "loss_binary_threshold",
    "loss_miscoverage",
    "loss_weighted_miscoverage",
    "image_loss",
    "CalibrationConfig",
    "CalibrationArtifact",
    "calibrate",
    "empirical_risk",
    "crc_condition",
    "feasibility_check",
    "min_feasible_alpha",
    "min_feasible_n",
    "EvaluationReport",
    "evaluate",
    "activation_ratio",
    "aggregate_runs",
    "HeatmapOptions",
    "intensity_map",
    "render",
    "overlay",
    "black_out",
    "ManifestEntry",
    "SplitSpec",
    "read_manifest",
    "write_manifest",
    "resolve_paths",
    "split",
    "read_scores",
    "write_scores",
    "read_mask",
    "write_mask",
    "read_multimask",
    "write_multimask",
    "SynthConfig",
    "TrialSummary",
    "generate",
    "write_dataset",
    "trial_seed",
    "validate_guarantee",
    "CrcsegError",
    "ValidationError",
    "FormatError",
    "DimensionMismatch",
    "LabelOutOfRange",
    "ZeroValidPixels",
    "EmptyCalibrationSet",
    "InfeasibleAlpha",
    "DegenerateSplit",
    "ReportConfigMismatch",
    "NpyFormatError",
    "BadMagic",
    "UnsupportedVersion",
    "HeaderParseError",
    "UnsupportedDescriptor",
    "FortranOrderUnsupported",
    "ShapeRankError",
    "DataSizeError",
    "SoftmaxValidationError",
    "InvalidMultiMask",
    "ManifestError",
    "ImageFormatError",
]
