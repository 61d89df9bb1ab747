"""Validity and efficiency metrics for calibrated predictors.

Empirical risk answers "does the guarantee hold on held-out data";
the activation ratio answers "how large did the sets have to get".
The activation ratio of a multi-mask is the mean prediction-set size
over labeled pixels, between 0 and K (1.0 for an argmax predictor,
K for the trivial all-classes predictor).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .calibration import CalibrationArtifact
from .errors import (
    DimensionMismatch,
    EmptyCalibrationSet,
    ReportConfigMismatch,
    ZeroValidPixels,
)
from .lac import lac_set, set_size_map
from .losses import LossSpec, image_loss
from .types import GroundTruthMask, MultiMask, ScoreTensor, one_hot

REPORT_FORMAT = "crcseg-report-v1"


def activation_ratio(pred: MultiMask, valid: np.ndarray) -> float:
    """Mean prediction-set size over pixels flagged valid."""
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != (pred.dims.h, pred.dims.w):
        raise DimensionMismatch(
            f"valid map {valid.shape} does not match mask {(pred.dims.h, pred.dims.w)}"
        )
    count = int(valid.sum())
    if count == 0:
        raise ZeroValidPixels("no labeled pixels to average set sizes over")
    sizes = set_size_map(pred)
    return float(sizes[valid].sum() / count)


@dataclass(frozen=True)
class EvaluationReport:
    """Held-out evaluation of one calibration artifact.

    ``per_image`` keeps (loss, activation ratio) per test image; the
    ratio is NaN for images without labeled pixels, which are skipped in
    the aggregate ratio. ``risk_std`` and ``ar_std`` are zero for a
    single run and become sample standard deviations under
    ``aggregate_runs``.
    """

    empirical_risk: float
    risk_std: float
    activation_ratio: float
    ar_std: float
    n_test: int
    lambda_hat: float
    alpha: float
    loss: LossSpec
    per_image: tuple[tuple[float, float], ...] | None = None

    def to_json(self) -> str:
        if self.per_image:
            # NaN ratios (unlabeled images) become null: strict JSON only
            rows = [[l, None if math.isnan(a) else a] for l, a in self.per_image]
        else:
            rows = None
        payload = {
            "format": REPORT_FORMAT,
            "empirical_risk": self.empirical_risk,
            "risk_std": self.risk_std,
            "activation_ratio": self.activation_ratio,
            "ar_std": self.ar_std,
            "n_test": self.n_test,
            "lambda_hat": self.lambda_hat,
            "alpha": self.alpha,
            "loss": self.loss.to_dict(),
            "per_image": rows,
        }
        return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        data = json.loads(text)
        if data.get("format") != REPORT_FORMAT:
            raise ValueError(f"not an evaluation report: format={data.get('format')!r}")
        per_image = data.get("per_image")
        if per_image:
            rows = tuple((l, float("nan") if a is None else a) for l, a in per_image)
        else:
            rows = None
        return cls(
            empirical_risk=data["empirical_risk"],
            risk_std=data["risk_std"],
            activation_ratio=data["activation_ratio"],
            ar_std=data["ar_std"],
            n_test=data["n_test"],
            lambda_hat=data["lambda_hat"],
            alpha=data["alpha"],
            loss=LossSpec.from_dict(data["loss"]),
            per_image=rows,
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.to_json())

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_json(handle.read())

    def to_csv(self) -> str:
        """Per-image rows as CSV: index, loss, activation_ratio."""
        if self.per_image is None:
            raise ValueError("report carries no per-image rows")
        lines = ["index,loss,activation_ratio"]
        for index, (loss, ratio) in enumerate(self.per_image):
            ratio_text = "" if math.isnan(ratio) else repr(ratio)
            lines.append(f"{index},{loss!r},{ratio_text}")
        return "\n".join(lines) + "\n"


def evaluate(test_set, artifact: CalibrationArtifact, threads: int = 1) -> EvaluationReport:
    """Apply the calibrated predictor to held-out pairs and report.

    ``test_set`` is a sequence of (ScoreTensor, GroundTruthMask) pairs.
    Losses follow the calibration convention: an image without labeled
    pixels contributes 0. Such images are excluded from the activation
    ratio, which has no meaningful value there.
    """
    pairs = list(test_set)
    if not pairs:
        raise EmptyCalibrationSet("test set is empty")

    spec = artifact.loss

    def one(pair):
        scores, mask = pair
        if not isinstance(scores, ScoreTensor) or not isinstance(mask, GroundTruthMask):
            raise TypeError("test examples must be (ScoreTensor, GroundTruthMask)")
        if scores.dims != mask.dims:
            raise DimensionMismatch(
                f"scores {scores.dims.shape} vs mask {mask.dims.shape}"
            )
        pred = lac_set(scores, artifact.lambda_hat, artifact.top1_fallback)
        loss = image_loss(spec, pred, one_hot(mask))
        if mask.valid_pixel_count == 0:
            ratio = float("nan")
        else:
            ratio = activation_ratio(pred, mask.valid)
        return loss, ratio

    rows = parallel_map(one, pairs, threads)
    losses = np.asarray([loss for loss, _ in rows], dtype=np.float64)
    ratios = np.asarray([r for _, r in rows], dtype=np.float64)
    usable = ~np.isnan(ratios)
    if not usable.any():
        raise ZeroValidPixels("no test image has labeled pixels")
    return EvaluationReport(
        empirical_risk=float(losses.mean()),
        risk_std=0.0,
        activation_ratio=float(ratios[usable].mean()),
        ar_std=0.0,
        n_test=len(pairs),
        lambda_hat=artifact.lambda_hat,
        alpha=artifact.alpha,
        loss=spec,
        per_image=tuple((float(l), float(r)) for l, r in rows),
    )


def aggregate_runs(reports) -> EvaluationReport:
    """Pool reports from repeated runs of one experiment.

    All reports must share alpha and loss. Means are averaged; the
    spread columns become sample standard deviations (ddof=1), zero for
    a single report. ``lambda_hat`` is averaged and ``n_test`` summed;
    per-image rows are dropped.
    """
    reports = list(reports)
    if not reports:
        raise ReportConfigMismatch("nothing to aggregate")
    head = reports[0]
    for report in reports[1:]:
        if report.alpha != head.alpha or report.loss != head.loss:
            raise ReportConfigMismatch(
                "aggregated reports must share alpha and loss settings"
            )
    risks = np.asarray([r.empirical_risk for r in reports], dtype=np.float64)
    ratios = np.asarray([r.activation_ratio for r in reports], dtype=np.float64)
    many = len(reports) > 1
    return EvaluationReport(
        empirical_risk=float(risks.mean()),
        risk_std=float(risks.std(ddof=1)) if many else 0.0,
        activation_ratio=float(ratios.mean()),
        ar_std=float(ratios.std(ddof=1)) if many else 0.0,
        n_test=int(sum(r.n_test for r in reports)),
        lambda_hat=float(np.mean([r.lambda_hat for r in reports])),
        alpha=head.alpha,
        loss=head.loss,
        per_image=None,
    )
