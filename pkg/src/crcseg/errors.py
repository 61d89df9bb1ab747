"""Exception hierarchy shared by every module.

Two families matter to callers: validation errors (bad parameters,
infeasible settings, degenerate inputs) and format errors (unreadable or
out-of-contract files). The CLI maps the first family to exit code 1 and
the second to exit code 2; ``code`` is a stable machine-readable slug.
"""

from __future__ import annotations


class CrcsegError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class ValidationError(CrcsegError):
    """Invalid parameters or data that fail a semantic check."""

    code = "validation"


class DimensionMismatch(ValidationError):
    code = "dimension-mismatch"


class LabelOutOfRange(ValidationError):
    """A non-IGNORE label is >= the class count of the paired scores."""

    code = "label-out-of-range"


class ZeroValidPixels(ValidationError):
    """An operation that averages over labeled pixels found none."""

    code = "zero-valid-pixels"


class EmptyCalibrationSet(ValidationError):
    code = "empty-calibration-set"


class InfeasibleAlpha(ValidationError):
    """The requested risk level cannot be certified at this sample size.

    Carries the smallest certifiable level for the given n (``min_alpha``)
    and the smallest n that would certify the requested level (``min_n``).
    """

    code = "infeasible-alpha"

    def __init__(self, alpha: float, n: int, bound_b: float, min_alpha: float, min_n: int):
        self.alpha = alpha
        self.n = n
        self.bound_b = bound_b
        self.min_alpha = min_alpha
        self.min_n = min_n
        super().__init__(
            f"alpha={alpha:g} is infeasible for n={n} (bound {bound_b:g}): "
            f"smallest feasible alpha is {min_alpha:.6g}, "
            f"smallest feasible n for alpha={alpha:g} is {min_n}"
        )


class DegenerateSplit(ValidationError):
    """A split would leave the calibration or test side empty."""

    code = "degenerate-split"


class ReportConfigMismatch(ValidationError):
    """Aggregation was asked to pool runs with different alpha or loss."""

    code = "report-config-mismatch"


class FormatError(CrcsegError):
    """A file does not conform to one of the documented formats."""

    code = "format"


class NpyFormatError(FormatError):
    code = "npy-format"


class BadMagic(NpyFormatError):
    code = "npy-bad-magic"


class UnsupportedVersion(NpyFormatError):
    code = "npy-unsupported-version"


class HeaderParseError(NpyFormatError):
    code = "npy-header-parse"


class UnsupportedDescriptor(NpyFormatError):
    code = "npy-unsupported-descriptor"


class FortranOrderUnsupported(NpyFormatError):
    code = "npy-fortran-order"


class ShapeRankError(NpyFormatError):
    code = "npy-shape-rank"


class DataSizeError(NpyFormatError):
    """Payload length disagrees with the header's shape and dtype."""

    code = "npy-data-size"


class SoftmaxValidationError(FormatError):
    """Scores are outside [0, 1] or per-pixel sums stray from 1."""

    code = "softmax-validation"


class InvalidMultiMask(FormatError):
    """A stored multi-labeled mask holds values other than 0 and 1."""

    code = "invalid-multimask"


class ManifestError(FormatError):
    code = "manifest"


class ImageFormatError(FormatError):
    code = "image-format"
