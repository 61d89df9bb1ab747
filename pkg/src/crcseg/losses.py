"""Image-level losses comparing a predicted multi-mask to ground truth.

All losses take values in [0, 1] and are non-increasing when the
prediction grows (adding classes to pixel sets never hurts), which is
what makes them calibratable. Coverage is always measured over labeled
pixels only.

Available kinds:

* ``binary``: 0 iff the prediction covers the whole ground truth.
* ``binary-threshold``: 0 iff the covered fraction reaches ``tau``; the
  comparison is strict, so with tau = 0.9 a covered fraction of 0.899
  still counts as a failure.
* ``miscoverage``: 1 minus the covered fraction.
* ``weighted-miscoverage``: per-class covered fractions averaged under
  user weights, renormalized over the classes present in the image.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroValidPixels
from .types import GroundTruthMask, MultiMask, mask_contains, one_hot

logger = logging.getLogger(__name__)

BINARY = "binary"
BINARY_THRESHOLD = "binary-threshold"
MISCOVERAGE = "miscoverage"
WEIGHTED_MISCOVERAGE = "weighted-miscoverage"

LOSS_KINDS = (BINARY, BINARY_THRESHOLD, MISCOVERAGE, WEIGHTED_MISCOVERAGE)


@dataclass(frozen=True)
class LossSpec:
    """A loss kind plus its parameters.

    ``tau`` is required by ``binary-threshold`` (in (0, 1]); ``weights``
    is required by ``weighted-miscoverage`` (one nonnegative weight per
    class, not all zero). ``bound_b`` is the a-priori upper bound of the
    loss; every kind here is bounded by 1.
    """

    kind: str
    tau: float | None = None
    weights: tuple[float, ...] | None = None
    bound_b: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if self.bound_b != 1.0:
            raise ValueError(f"all provided losses are bounded by 1, got bound_b={self.bound_b!r}")
        if self.kind == BINARY_THRESHOLD:
            if self.tau is None:
                raise ValueError("binary-threshold loss needs tau")
            tau = float(self.tau)
            if not 0.0 < tau <= 1.0:
                raise ValueError(f"tau must lie in (0, 1], got {tau!r}")
            object.__setattr__(self, "tau", tau)
        elif self.tau is not None:
            raise ValueError(f"tau is only meaningful for {BINARY_THRESHOLD!r}")
        if self.kind == WEIGHTED_MISCOVERAGE:
            if self.weights is None:
                raise ValueError("weighted-miscoverage loss needs per-class weights")
            weights = tuple(float(w) for w in self.weights)
            if any(w < 0 for w in weights):
                raise ValueError("weights must be nonnegative")
            if sum(weights) <= 0:
                raise ValueError("weights must not all be zero")
            object.__setattr__(self, "weights", weights)
        elif self.weights is not None:
            raise ValueError(f"weights are only meaningful for {WEIGHTED_MISCOVERAGE!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tau": self.tau,
            "weights": list(self.weights) if self.weights is not None else None,
            "bound_b": self.bound_b,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LossSpec":
        weights = data.get("weights")
        return cls(
            kind=data["kind"],
            tau=data.get("tau"),
            weights=tuple(weights) if weights is not None else None,
            bound_b=data.get("bound_b", 1.0),
        )


def binary() -> LossSpec:
    return LossSpec(BINARY)


def binary_threshold(tau: float) -> LossSpec:
    return LossSpec(BINARY_THRESHOLD, tau=tau)


def miscoverage() -> LossSpec:
    return LossSpec(MISCOVERAGE)


def weighted_miscoverage(weights) -> LossSpec:
    return LossSpec(WEIGHTED_MISCOVERAGE, weights=tuple(weights))


def _check_pair(pred: MultiMask, truth: MultiMask) -> None:
    if pred.dims != truth.dims:
        raise DimensionMismatch(
            f"prediction {pred.dims.shape} does not match truth {truth.dims.shape}"
        )


def coverage_ratio(pred: MultiMask, truth: MultiMask) -> float:
    """Fraction of labeled pixels whose true class the prediction covers."""
    _check_pair(pred, truth)
    denom = int(truth.bits.sum(dtype=np.int64))
    if denom == 0:
        raise ZeroValidPixels("ground truth has no labeled pixels")
    num = int((pred.bits & truth.bits).sum(dtype=np.int64))
    return num / denom


def loss_binary(pred: MultiMask, truth: MultiMask) -> float:
    """0 iff the prediction covers every labeled pixel's true class."""
    return 0.0 if mask_contains(pred, truth) else 1.0


def loss_binary_threshold(pred: MultiMask, truth: MultiMask, tau: float) -> float:
    """1 iff the covered fraction falls strictly below ``tau``."""
    return 1.0 if coverage_ratio(pred, truth) < tau else 0.0


def loss_miscoverage(pred: MultiMask, truth: MultiMask) -> float:
    """1 minus the covered fraction of labeled pixels."""
    return 1.0 - coverage_ratio(pred, truth)


def loss_weighted_miscoverage(pred: MultiMask, truth: MultiMask, weights) -> float:
    """Weighted average of per-class miscoverage over classes present.

    Weights of absent classes are dropped and the rest renormalized. If
    every present class carries zero weight, the loss is 0 by convention
    (there is nothing the weights ask us to cover) and a warning is
    logged.
    """
    _check_pair(pred, truth)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (truth.dims.k,):
        raise DimensionMismatch(
            f"need {truth.dims.k} weights, got shape {weights.shape}"
        )
    per_class_truth = truth.bits.sum(axis=(1, 2), dtype=np.int64)
    present = per_class_truth > 0
    if not present.any():
        raise ZeroValidPixels("ground truth has no labeled pixels")
    covered = (pred.bits & truth.bits).sum(axis=(1, 2), dtype=np.int64)
    ratios = covered[present] / per_class_truth[present]
    effective = weights[present]
    total = effective.sum()
    if total <= 0:
        logger.warning("all weight sits on absent classes; weighted miscoverage set to 0")
        return 0.0
    return float(1.0 - (effective * ratios).sum() / total)


def image_loss(spec: LossSpec, pred: MultiMask, truth: MultiMask) -> float:
    """Evaluate ``spec`` on one image.

    Images without a single labeled pixel contribute a loss of 0 (they
    carry no evidence either way) and are flagged in the log.
    """
    try:
        if spec.kind == BINARY:
            return loss_binary(pred, truth)
        if spec.kind == BINARY_THRESHOLD:
            return loss_binary_threshold(pred, truth, spec.tau)
        if spec.kind == MISCOVERAGE:
            return loss_miscoverage(pred, truth)
        return loss_weighted_miscoverage(pred, truth, spec.weights)
    except ZeroValidPixels:
        logger.warning("image has no labeled pixels; its loss is taken as 0")
        return 0.0


def encode_truth(mask: GroundTruthMask) -> MultiMask:
    """One-hot encode ground truth for use as the loss reference."""
    return one_hot(mask)
