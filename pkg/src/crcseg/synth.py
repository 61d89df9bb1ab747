"""Synthetic segmentation data and a Monte-Carlo check of the guarantee.

Ground truth is a random Voronoi partition: sites drop uniformly on the
pixel grid, each with a uniformly drawn class, and every pixel takes
the class of its nearest site. The simulated "model" sees the true
class through a noisy channel: with probability ``corruption`` a pixel's
favored class is swapped for a uniformly drawn wrong one, then logits
are built as a fixed margin on the favored class plus standard Gaussian
noise, scaled by ``1 / temperature``, and softmaxed. Corruption is the
dominant error source (the margin keeps the favored class on top with
probability ~0.996 for K=5), so top-1 accuracy sits near
``1 - corruption``; temperature only sharpens or flattens the scores.

``validate_guarantee`` repeats the full pipeline - fresh data, split,
calibrate, evaluate - and checks the mean held-out risk against the
target level with a three-standard-error allowance.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .calibration import CalibrationConfig, calibrate, feasibility_check
from .manifest import ManifestEntry, write_manifest
from .metrics import evaluate
from .npyio import write_mask, write_scores
from .rng import SplitMix64
from .types import Dims, GroundTruthMask, ScoreTensor

TRIAL_SUMMARY_FORMAT = "crcseg-trial-summary-v1"

# logit lead of the favored class over the rest, in noise standard deviations
LOGIT_MARGIN = 4.0


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    Attributes:
        dims: Class count and image geometry.
        n_images: Examples per generated dataset, at least 2.
        blob_count: Expected number of Voronoi sites per image.
        temperature: Softmax sharpness; lower is more confident.
        corruption: Probability that a pixel's favored class is wrong.
        seed: 64-bit master seed.
    """

    dims: Dims
    n_images: int
    blob_count: float = 6.0
    temperature: float = 1.0
    corruption: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_images) < 2:
            raise ValueError(f"n_images must be >= 2, got {self.n_images}")
        if float(self.blob_count) < 1.0:
            raise ValueError(f"blob_count must be >= 1, got {self.blob_count}")
        if float(self.temperature) <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 <= float(self.corruption) <= 1.0:
            raise ValueError(f"corruption must lie in [0, 1], got {self.corruption}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "n_images", int(self.n_images))
        object.__setattr__(self, "blob_count", float(self.blob_count))
        object.__setattr__(self, "temperature", float(self.temperature))
        object.__setattr__(self, "corruption", float(self.corruption))
        object.__setattr__(self, "seed", int(self.seed))


def _one_image(config: SynthConfig, rng: np.random.Generator):
    k, h, w = config.dims.shape
    n_sites = max(1, int(rng.poisson(config.blob_count)))
    site_rows = rng.uniform(0.0, h, n_sites)
    site_cols = rng.uniform(0.0, w, n_sites)
    site_classes = rng.integers(0, k, n_sites)

    rows = np.arange(h, dtype=np.float64)[:, None, None]
    cols = np.arange(w, dtype=np.float64)[None, :, None]
    squared = (rows - site_rows) ** 2 + (cols - site_cols) ** 2
    truth = site_classes[np.argmin(squared, axis=2)]

    corrupted = rng.random((h, w)) < config.corruption
    offsets = rng.integers(1, k, (h, w))
    favored = np.where(corrupted, (truth + offsets) % k, truth)

    logits = rng.standard_normal((k, h, w))
    grid_rows, grid_cols = np.indices((h, w))
    logits[favored, grid_rows, grid_cols] += LOGIT_MARGIN
    logits /= config.temperature
    logits -= logits.max(axis=0, keepdims=True)
    scores = np.exp(logits)
    scores /= scores.sum(axis=0, keepdims=True)

    dtype = np.uint8 if k <= np.iinfo(np.uint8).max else np.uint16
    mask = GroundTruthMask(config.dims, truth.astype(dtype))
    return ScoreTensor(config.dims, scores.astype(np.float32)), mask


def generate(config: SynthConfig) -> list[tuple[ScoreTensor, GroundTruthMask]]:
    """Generate ``n_images`` i.i.d. examples; same config, same bits."""
    rng = np.random.default_rng(config.seed)
    return [_one_image(config, rng) for _ in range(config.n_images)]


def write_dataset(config: SynthConfig, out_dir) -> str:
    """Generate a dataset and lay it out as NPY files plus a manifest.

    Returns the manifest path. Entry paths are stored relative to the
    manifest, so the directory can be moved wholesale.
    """
    os.makedirs(out_dir, exist_ok=True)
    width = max(4, len(str(config.n_images - 1)))
    entries = []
    for index, (scores, mask) in enumerate(generate(config)):
        stem = f"img{index:0{width}d}"
        write_scores(os.path.join(out_dir, f"{stem}_scores.npy"), scores)
        write_mask(os.path.join(out_dir, f"{stem}_mask.npy"), mask)
        entries.append(
            ManifestEntry(
                id=stem,
                scores_path=f"{stem}_scores.npy",
                mask_path=f"{stem}_mask.npy",
            )
        )
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    write_manifest(manifest_path, entries)
    return manifest_path


@dataclass(frozen=True)
class TrialSummary:
    """Monte-Carlo outcome: ``passed`` iff mean risk <= alpha + 3 SE."""

    trials: int
    alpha: float
    mean_test_risk: float
    std_test_risk: float
    standard_error: float
    passed: bool

    def __post_init__(self):
        expected = self.mean_test_risk <= self.alpha + 3.0 * self.standard_error
        if self.passed != expected:
            raise ValueError("passed flag disagrees with the 3-standard-error rule")

    def to_json(self) -> str:
        payload = {
            "format": TRIAL_SUMMARY_FORMAT,
            "trials": self.trials,
            "alpha": self.alpha,
            "mean_test_risk": self.mean_test_risk,
            "std_test_risk": self.std_test_risk,
            "standard_error": self.standard_error,
            "pass": self.passed,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrialSummary":
        data = json.loads(text)
        if data.get("format") != TRIAL_SUMMARY_FORMAT:
            raise ValueError(f"not a trial summary: format={data.get('format')!r}")
        return cls(
            trials=data["trials"],
            alpha=data["alpha"],
            mean_test_risk=data["mean_test_risk"],
            std_test_risk=data["std_test_risk"],
            standard_error=data["standard_error"],
            passed=data["pass"],
        )


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Per-trial seed: the ``trial_index``-th output of splitmix64(master)."""
    mix = SplitMix64(master_seed)
    value = 0
    for _ in range(trial_index + 1):
        value = mix.next_u64()
    return value


def validate_guarantee(
    config: SynthConfig,
    cal_config: CalibrationConfig,
    trials: int,
    cal_fraction: float = 0.5,
    threads: int = 1,
) -> TrialSummary:
    """Monte-Carlo check that the calibrated risk stays under alpha.

    Each trial draws a fresh dataset from ``config`` (reseeded per trial
    index), splits off the first ceil(cal_fraction * n_images) examples
    for calibration (examples are i.i.d., so any fixed split is
    exchangeable), calibrates, and evaluates on the rest. Deterministic
    given (config.seed, trials).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 0.0 < cal_fraction < 1.0:
        raise ValueError(f"cal_fraction must lie in (0, 1), got {cal_fraction}")
    n_cal = math.ceil(cal_fraction * config.n_images)
    if n_cal < 1 or n_cal >= config.n_images:
        raise ValueError("cal_fraction leaves no calibration or no test images")
    feasibility_check(cal_config, n_cal)

    risks = []
    for index in range(trials):
        data = generate(replace(config, seed=trial_seed(config.seed, index)))
        artifact = calibrate(data[:n_cal], cal_config, threads=threads)
        report = evaluate(data[n_cal:], artifact, threads=threads)
        risks.append(report.empirical_risk)

    risks = np.asarray(risks, dtype=np.float64)
    mean = float(risks.mean())
    std = float(risks.std(ddof=1)) if trials > 1 else 0.0
    stderr = std / math.sqrt(trials)
    return TrialSummary(
        trials=trials,
        alpha=cal_config.alpha,
        mean_test_risk=mean,
        std_test_risk=std,
        standard_error=stderr,
        passed=mean <= cal_config.alpha + 3.0 * stderr,
    )
