"""Thresholded prediction sets over score tensors.

A pixel's prediction set at coverage parameter lambda contains every
class whose score is at least ``1 - lambda``. Sets grow with lambda:
lambda = 0 keeps only classes scored exactly 1, lambda = 1 keeps all of
them. The optional top-1 fallback additionally forces each pixel's
highest-scored class into the set so no pixel ends up empty.
"""

from __future__ import annotations

import numpy as np

from .types import MultiMask, ScoreTensor


def check_coverage_parameter(lam: float) -> float:
    """Validate a coverage parameter, returning it as a float."""
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"coverage parameter must lie in [0, 1], got {lam!r}")
    return lam


def threshold_indicator(p: float, lam: float) -> int:
    """1 iff score ``p`` clears the inclusion threshold ``1 - lam``.

    The comparison is inclusive, so a score of exactly ``1 - lam`` is in.
    """
    lam = check_coverage_parameter(lam)
    return 1 if float(p) >= 1.0 - lam else 0


def lac_set(scores: ScoreTensor, lam: float, top1_fallback: bool = True) -> MultiMask:
    """Per-pixel prediction sets: classes scored at least ``1 - lam``.

    With ``top1_fallback`` each pixel's argmax class (smallest class index
    on ties) is forced into the set, guaranteeing nonempty sets.
    """
    lam = check_coverage_parameter(lam)
    values = scores.values
    bits = (values >= 1.0 - lam).astype(np.uint8)
    if top1_fallback:
        top = values.argmax(axis=0)
        np.put_along_axis(bits, top[np.newaxis], 1, axis=0)
    return MultiMask(scores.dims, bits)


def set_size_map(mask: MultiMask) -> np.ndarray:
    """Per-pixel prediction-set sizes as an (H, W) int64 array."""
    return mask.bits.sum(axis=0, dtype=np.int64)
