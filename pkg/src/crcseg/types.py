"""Core data model: score tensors, label masks, and multi-labeled masks.

A multi-labeled mask assigns each pixel a *subset* of the K classes,
stored as a (K, H, W) tensor of 0/1 bytes. The one-hot encoding of a
ground-truth mask is the special case with at most one active class per
pixel; unlabeled pixels carry the IGNORE sentinel (the maximum value of
the mask's integer dtype), get an all-zero column, and are excluded from
every loss and metric.

All types are immutable after construction: the wrapped arrays are
copied and marked read-only, so instances are safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import numpy as np

from .errors import DimensionMismatch, LabelOutOfRange, SoftmaxValidationError

# Per-pixel score sums may stray from 1 by at most this much.
SOFTMAX_SUM_TOL = 1e-4

_LABEL_DTYPES = (np.uint8, np.uint16)


def _freeze(values, dtype) -> np.ndarray:
    """Return a C-ordered, read-only copy of ``values``."""
    arr = np.array(values, dtype=dtype, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dims:
    """Tensor geometry: K classes over an H x W pixel grid.

    Attributes:
        k: Number of classes, at least 2.
        h: Image height in pixels, positive.
        w: Image width in pixels, positive.
    """

    k: int
    h: int
    w: int

    def __post_init__(self):
        for name in ("k", "h", "w"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.k < 2:
            raise ValueError(f"need at least 2 classes, got k={self.k}")
        for name in ("k", "h", "w"):
            object.__setattr__(self, name, int(getattr(self, name)))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.k, self.h, self.w)


@dataclass(frozen=True)
class ScoreTensor:
    """Per-pixel class scores, shape (K, H, W), entries in [0, 1].

    With ``validate`` on (the default) every pixel's scores must sum to 1
    within ``SOFTMAX_SUM_TOL``; turn it off for quantized or otherwise
    lossy score dumps where the sums drift.
    """

    dims: Dims
    values: np.ndarray
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        values = np.asarray(self.values)
        if values.shape != self.dims.shape:
            raise DimensionMismatch(
                f"scores shape {values.shape} != declared {self.dims.shape}"
            )
        values = _freeze(values, np.float32)
        if validate:
            if not np.isfinite(values).all():
                raise SoftmaxValidationError("scores must be finite")
            lo = float(values.min())
            hi = float(values.max())
            if lo < 0.0 or hi > 1.0:
                raise SoftmaxValidationError(
                    f"scores must lie in [0, 1], found range [{lo:g}, {hi:g}]"
                )
            sums = values.sum(axis=0, dtype=np.float64)
            drift = float(np.abs(sums - 1.0).max())
            if drift > SOFTMAX_SUM_TOL:
                raise SoftmaxValidationError(
                    f"per-pixel score sums stray from 1 by {drift:g} "
                    f"(tolerance {SOFTMAX_SUM_TOL:g})"
                )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, validate: bool = True) -> "ScoreTensor":
        """Build a tensor whose dims are taken from the array shape."""
        values = np.asarray(values)
        if values.ndim != 3:
            raise DimensionMismatch(f"scores must have 3 axes, got {values.ndim}")
        return cls(Dims(*values.shape), values, validate)


@dataclass(frozen=True)
class GroundTruthMask:
    """Integer label grid of shape (H, W).

    Labels live in {0, ..., K-1}; the maximum value of the dtype (255 for
    uint8, 65535 for uint16) is the IGNORE sentinel for unlabeled pixels.
    """

    dims: Dims
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.dtype not in _LABEL_DTYPES:
            raise TypeError(
                f"labels must be uint8 or uint16, got {labels.dtype}"
            )
        if labels.shape != (self.dims.h, self.dims.w):
            raise DimensionMismatch(
                f"labels shape {labels.shape} != declared {(self.dims.h, self.dims.w)}"
            )
        sentinel = np.iinfo(labels.dtype).max
        if self.dims.k > sentinel:
            raise ValueError(
                f"k={self.dims.k} cannot be represented by {labels.dtype} labels"
            )
        valid = labels != sentinel
        if valid.any():
            top = int(labels[valid].max())
            if top >= self.dims.k:
                raise LabelOutOfRange(
                    f"label {top} out of range for k={self.dims.k} "
                    f"(IGNORE sentinel is {sentinel})"
                )
        object.__setattr__(self, "labels", _freeze(labels, labels.dtype))

    @classmethod
    def from_labels(cls, labels, k: int) -> "GroundTruthMask":
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise DimensionMismatch(f"labels must have 2 axes, got {labels.ndim}")
        return cls(Dims(k, *labels.shape), labels)

    @property
    def ignore_value(self) -> int:
        return int(np.iinfo(self.labels.dtype).max)

    @property
    def valid(self) -> np.ndarray:
        """Boolean (H, W) map of labeled pixels."""
        return self.labels != self.ignore_value

    @property
    def valid_pixel_count(self) -> int:
        return int(self.valid.sum())


@dataclass(frozen=True)
class MultiMask:
    """Multi-labeled mask: (K, H, W) tensor of 0/1 bytes.

    ``bits[k, i, j] == 1`` means class k belongs to pixel (i, j)'s set.
    """

    dims: Dims
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.dtype == np.bool_:
            bits = bits.astype(np.uint8)
        if not np.issubdtype(bits.dtype, np.integer):
            raise TypeError(f"bits must be integer-typed, got {bits.dtype}")
        if bits.shape != self.dims.shape:
            raise DimensionMismatch(
                f"bits shape {bits.shape} != declared {self.dims.shape}"
            )
        if bits.size and (bits.min() < 0 or bits.max() > 1):
            raise ValueError("bits must hold only 0 and 1")
        object.__setattr__(self, "bits", _freeze(bits, np.uint8))

    @classmethod
    def from_bits(cls, bits) -> "MultiMask":
        bits = np.asarray(bits)
        if bits.ndim != 3:
            raise DimensionMismatch(f"bits must have 3 axes, got {bits.ndim}")
        return cls(Dims(*bits.shape), bits)


def one_hot(mask: GroundTruthMask) -> MultiMask:
    """One-hot encode a ground-truth mask; IGNORE pixels stay all-zero."""
    bits = np.zeros(mask.dims.shape, dtype=np.uint8)
    rows, cols = np.nonzero(mask.valid)
    bits[mask.labels[rows, cols].astype(np.intp), rows, cols] = 1
    return MultiMask(mask.dims, bits)


def mask_contains(a: MultiMask, b: MultiMask) -> bool:
    """True iff ``a`` covers ``b``: every pixel set of ``a`` is a superset.

    This is the containment partial order on multi-labeled masks.
    """
    if a.dims != b.dims:
        raise DimensionMismatch(f"cannot compare {a.dims.shape} with {b.dims.shape}")
    return bool(np.all(a.bits >= b.bits))
