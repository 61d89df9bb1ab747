"""Shared factories for randomized test instances."""

from __future__ import annotations

import numpy as np

from crcseg import Dims, GroundTruthMask, MultiMask, ScoreTensor


def random_scores(rng: np.random.Generator, k: int, h: int, w: int) -> ScoreTensor:
    """A valid score tensor: softmax of Gaussian logits."""
    logits = rng.standard_normal((k, h, w))
    logits -= logits.max(axis=0, keepdims=True)
    values = np.exp(logits)
    values /= values.sum(axis=0, keepdims=True)
    return ScoreTensor(Dims(k, h, w), values.astype(np.float32))


def random_mask(
    rng: np.random.Generator,
    k: int,
    h: int,
    w: int,
    ignore_fraction: float = 0.0,
    dtype=np.uint8,
) -> GroundTruthMask:
    labels = rng.integers(0, k, (h, w)).astype(dtype)
    if ignore_fraction > 0:
        labels[rng.random((h, w)) < ignore_fraction] = np.iinfo(dtype).max
    return GroundTruthMask(Dims(k, h, w), labels)


def random_multimask(rng: np.random.Generator, k: int, h: int, w: int) -> MultiMask:
    return MultiMask(Dims(k, h, w), (rng.random((k, h, w)) < 0.5).astype(np.uint8))


def grow(rng: np.random.Generator, mask: MultiMask, p: float = 0.3) -> MultiMask:
    """A strictly-comparable superset: raise each zero bit with probability p."""
    extra = (rng.random(mask.bits.shape) < p).astype(np.uint8)
    return MultiMask(mask.dims, mask.bits | extra)


def _coverage_onsets(scores: ScoreTensor, mask: GroundTruthMask, top1_fallback: bool):
    """Per labeled pixel, the smallest lambda at which its true class is kept.

    Derived straight from the inclusion rule (score >= 1 - lambda, so the
    onset is 1 - score; 0 if the fallback pins the pixel's argmax) without
    touching the library's set constructor.
    """
    values = scores.values.astype(np.float64)
    rows, cols = np.nonzero(mask.valid)
    labels = mask.labels[rows, cols].astype(np.intp)
    onsets = 1.0 - values[labels, rows, cols]
    if top1_fallback:
        argmax = values.argmax(axis=0)
        onsets = np.where(argmax[rows, cols] == labels, 0.0, onsets)
    return np.sort(onsets)


def grid_lambda_oracle(pairs, spec, alpha: float, step: float, top1_fallback: bool = True) -> float:
    """Exhaustive-grid reference for the calibrated coverage parameter.

    Evaluates the corrected empirical risk on an even grid over [0, 1]
    (by enumerating per-pixel coverage onsets, sharing no code with the
    bisection) and returns the first grid point that clears alpha.
    """
    grid = np.linspace(0.0, 1.0, round(1.0 / step) + 1)
    n = len(pairs)
    total = np.zeros_like(grid)
    for scores, mask in pairs:
        onsets = _coverage_onsets(scores, mask, top1_fallback)
        if onsets.size == 0:
            continue  # unlabeled image: loss 0 at every lambda
        ratio = np.searchsorted(onsets, grid, side="right") / onsets.size
        if spec.kind == "miscoverage":
            total += 1.0 - ratio
        elif spec.kind == "binary":
            total += (ratio < 1.0).astype(np.float64)
        elif spec.kind == "binary-threshold":
            total += (ratio < spec.tau).astype(np.float64)
        else:
            raise NotImplementedError(f"oracle does not cover {spec.kind}")
    corrected = (n / (n + 1)) * (total / n) + spec.bound_b / (n + 1)
    feasible = corrected <= alpha
    first = int(np.argmax(feasible))
    assert feasible[first], "no feasible grid point"
    return float(grid[first])


def mutate_npy(rng, data: bytes) -> bytes:
    """Damage the preamble of an NPY byte string in a random small way.

    Mutations target the magic, version, length field, and header text
    (roughly the first 128 bytes), plus truncations and insertions, so a
    parser has to survive arbitrary garbage in every header field.
    """
    blob = bytearray(data)
    zone = min(len(blob), 128)
    kind = int(rng.integers(0, 5))
    if kind == 0:  # flip bytes
        for _ in range(int(rng.integers(1, 5))):
            blob[int(rng.integers(0, zone))] = int(rng.integers(0, 256))
    elif kind == 1:  # truncate
        blob = blob[: int(rng.integers(0, len(blob)))]
    elif kind == 2:  # insert junk
        at = int(rng.integers(0, zone))
        junk = bytes(rng.integers(0, 256, size=int(rng.integers(1, 9)), dtype=np.uint8))
        blob = blob[:at] + junk + blob[at:]
    elif kind == 3:  # scramble the declared header length
        if len(blob) >= 10:
            blob[8] = int(rng.integers(0, 256))
            blob[9] = int(rng.integers(0, 256))
        else:
            blob = blob[:4]
    else:  # rewrite a slice of the header text
        at = int(rng.integers(10, max(11, zone)))
        width = int(rng.integers(1, 17))
        blob[at : at + width] = bytes(
            rng.integers(32, 127, size=width, dtype=np.uint8)
        )
    return bytes(blob)
