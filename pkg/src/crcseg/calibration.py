"""Risk calibration of the coverage parameter.

Given n exchangeable calibration images and a monotone loss bounded by
B, the calibrated parameter is the smallest lambda whose corrected
empirical risk clears the target level alpha:

    (n / (n + 1)) * R_n(lambda) + B / (n + 1) <= alpha

Prediction sets grow with lambda and the losses shrink, so the
corrected risk is non-increasing in lambda and the smallest feasible
lambda can be located by bisection. The search keeps an invariant pair
(lo, hi) with the condition false at lo and true at hi, halts once
``hi - lo <= epsilon``, and returns hi, so the result overshoots the
exact infimum by at most epsilon and the guarantee is preserved. Per
image, the loss is evaluated lazily at each probe; nothing is
precomputed per lambda.

The resulting artifact records everything needed to reproduce and audit
the run: the calibrated lambda, the settings, and the corrected-risk
probes visited by the search.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .errors import (
    DimensionMismatch,
    EmptyCalibrationSet,
    InfeasibleAlpha,
    ValidationError,
)
from .lac import lac_set
from .losses import LossSpec, image_loss
from .types import GroundTruthMask, MultiMask, ScoreTensor, one_hot

ARTIFACT_FORMAT = "crcseg-artifact-v1"

# Monotonicity of stored risk curves is asserted up to this slack; the
# probes are exact means of identical per-image values, so any violation
# beyond it indicates a real bug rather than float noise.
_CURVE_TOL = 1e-12


def tool_version() -> str:
    from . import __version__

    return f"crcseg {__version__}"


@dataclass(frozen=True)
class CalibrationConfig:
    """Settings of one calibration run.

    Attributes:
        alpha: Target risk level in (0, 1).
        loss: Loss to control.
        epsilon: Bisection stopping width, in (0, 1e-2].
        top1_fallback: Force each pixel's top-scored class into its set,
            both here and at inference, so sets are never empty.
        seed: 64-bit seed recorded for any shuffling done by callers.
    """

    alpha: float
    loss: LossSpec
    epsilon: float = 1e-5
    top1_fallback: bool = True
    seed: int = 0

    def __post_init__(self):
        alpha = float(self.alpha)
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
        epsilon = float(self.epsilon)
        if not 0.0 < epsilon <= 1e-2:
            raise ValueError(f"epsilon must lie in (0, 1e-2], got {epsilon!r}")
        if not isinstance(self.loss, LossSpec):
            raise TypeError("loss must be a LossSpec")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "epsilon", epsilon)
        object.__setattr__(self, "seed", int(self.seed))


def empirical_risk(losses) -> float:
    """Mean of per-image losses; rejects an empty collection."""
    losses = np.asarray(list(losses), dtype=np.float64)
    if losses.size == 0:
        raise EmptyCalibrationSet("cannot average zero losses")
    return float(losses.mean())


def crc_condition(r_hat: float, n: int, bound_b: float, alpha: float) -> bool:
    """True iff the corrected empirical risk clears the target level."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return (n / (n + 1)) * r_hat + bound_b / (n + 1) <= alpha


def min_feasible_alpha(n: int, bound_b: float = 1.0) -> float:
    """Smallest certifiable alpha at sample size n: B / (n + 1)."""
    return bound_b / (n + 1)


def min_feasible_n(alpha: float, bound_b: float = 1.0) -> int:
    """Smallest n whose correction term B / (n + 1) fits under alpha."""
    n = max(1, math.ceil(bound_b / alpha) - 2)
    while bound_b / (n + 1) > alpha:
        n += 1
    return n


def feasibility_check(config: CalibrationConfig, n: int) -> None:
    """Raise InfeasibleAlpha unless alpha is certifiable with n images.

    Every provided loss vanishes at lambda = 1 (all classes predicted),
    so feasibility reduces to ``alpha >= B / (n + 1)``.
    """
    if n < 1:
        raise EmptyCalibrationSet("calibration set is empty")
    bound_b = config.loss.bound_b
    if not crc_condition(0.0, n, bound_b, config.alpha):
        raise InfeasibleAlpha(
            alpha=config.alpha,
            n=n,
            bound_b=bound_b,
            min_alpha=min_feasible_alpha(n, bound_b),
            min_n=min_feasible_n(config.alpha, bound_b),
        )


@dataclass(frozen=True)
class CalibrationArtifact:
    """Deployable output of a calibration run.

    ``risk_curve`` holds the corrected-search probes as (lambda, risk)
    pairs sorted by lambda; it always contains lambda_hat itself, so the
    acceptance condition can be rechecked from the artifact alone.
    """

    lambda_hat: float
    alpha: float
    n: int
    bound_b: float
    epsilon: float
    loss: LossSpec
    top1_fallback: bool
    risk_curve: tuple[tuple[float, float], ...]
    created_at: str = ""
    tool_version: str = field(default_factory=tool_version)

    def __post_init__(self):
        if not 0.0 <= self.lambda_hat <= 1.0:
            raise ValidationError(f"lambda_hat must lie in [0, 1], got {self.lambda_hat!r}")
        curve = tuple((float(l), float(r)) for l, r in self.risk_curve)
        lams = [l for l, _ in curve]
        if lams != sorted(set(lams)):
            raise ValidationError("risk_curve must be sorted by strictly increasing lambda")
        risks = [r for _, r in curve]
        for a, b in zip(risks, risks[1:]):
            if b > a + _CURVE_TOL:
                raise ValidationError("risk_curve must be non-increasing in lambda")
        by_lam = dict(curve)
        if self.lambda_hat not in by_lam:
            raise ValidationError("risk_curve must contain a probe at lambda_hat")
        if not crc_condition(by_lam[self.lambda_hat], self.n, self.bound_b, self.alpha):
            raise ValidationError(
                "stored risk at lambda_hat does not satisfy the acceptance condition"
            )
        object.__setattr__(self, "risk_curve", curve)
        if not self.created_at:
            now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            object.__setattr__(self, "created_at", now)

    def risk_at_lambda_hat(self) -> float:
        return dict(self.risk_curve)[self.lambda_hat]

    def to_json(self) -> str:
        payload = {
            "format": ARTIFACT_FORMAT,
            "lambda_hat": self.lambda_hat,
            "alpha": self.alpha,
            "n": self.n,
            "bound_b": self.bound_b,
            "epsilon": self.epsilon,
            "loss": self.loss.to_dict(),
            "top1_fallback": self.top1_fallback,
            "risk_curve": [[l, r] for l, r in self.risk_curve],
            "created_at": self.created_at,
            "tool_version": self.tool_version,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CalibrationArtifact":
        data = json.loads(text)
        if data.get("format") != ARTIFACT_FORMAT:
            raise ValidationError(f"not a calibration artifact: format={data.get('format')!r}")
        return cls(
            lambda_hat=data["lambda_hat"],
            alpha=data["alpha"],
            n=data["n"],
            bound_b=data["bound_b"],
            epsilon=data["epsilon"],
            loss=LossSpec.from_dict(data["loss"]),
            top1_fallback=data["top1_fallback"],
            risk_curve=tuple((l, r) for l, r in data["risk_curve"]),
            created_at=data["created_at"],
            tool_version=data["tool_version"],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.to_json())

    @classmethod
    def load(cls, path) -> "CalibrationArtifact":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_json(handle.read())


def _prepare(cal_set) -> list[tuple[ScoreTensor, MultiMask]]:
    pairs = []
    k = None
    for index, (scores, mask) in enumerate(cal_set):
        if not isinstance(scores, ScoreTensor) or not isinstance(mask, GroundTruthMask):
            raise TypeError("calibration examples must be (ScoreTensor, GroundTruthMask)")
        if scores.dims != mask.dims:
            raise DimensionMismatch(
                f"example {index}: scores {scores.dims.shape} vs mask {mask.dims.shape}"
            )
        if k is None:
            k = scores.dims.k
        elif scores.dims.k != k:
            raise DimensionMismatch(
                f"example {index}: class count {scores.dims.k} != {k} of earlier examples"
            )
        pairs.append((scores, one_hot(mask)))
    return pairs


def risk_at(pairs, spec: LossSpec, lam: float, top1_fallback: bool, threads: int = 1) -> float:
    """Mean loss over prepared (scores, one-hot truth) pairs at one lambda."""

    def one(pair):
        scores, truth = pair
        return image_loss(spec, lac_set(scores, lam, top1_fallback), truth)

    return empirical_risk(parallel_map(one, pairs, threads))


def calibrate(
    cal_set,
    config: CalibrationConfig,
    threads: int = 1,
    created_at: str | None = None,
) -> CalibrationArtifact:
    """Find the smallest lambda certified at level alpha, by bisection.

    ``cal_set`` is a sequence of (ScoreTensor, GroundTruthMask) pairs
    sharing one class count. The run is deterministic: identical inputs
    and config give an identical artifact, timestamp aside (pass
    ``created_at`` to pin that too).
    """
    pairs = _prepare(cal_set)
    n = len(pairs)
    feasibility_check(config, n)
    spec = config.loss
    bound_b = spec.bound_b

    probes: dict[float, float] = {}

    def corrected_ok(lam: float) -> bool:
        risk = risk_at(pairs, spec, lam, config.top1_fallback, threads)
        probes[lam] = risk
        return crc_condition(risk, n, bound_b, config.alpha)

    if not corrected_ok(1.0):
        # cannot happen with the provided losses (risk is 0 at lambda=1);
        # guards custom data whose scores were left unvalidated
        raise InfeasibleAlpha(
            alpha=config.alpha,
            n=n,
            bound_b=bound_b,
            min_alpha=min_feasible_alpha(n, bound_b),
            min_n=min_feasible_n(config.alpha, bound_b),
        )
    if corrected_ok(0.0):
        lambda_hat = 0.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > config.epsilon:
            mid = 0.5 * (lo + hi)
            if corrected_ok(mid):
                hi = mid
            else:
                lo = mid
        lambda_hat = hi

    return CalibrationArtifact(
        lambda_hat=lambda_hat,
        alpha=config.alpha,
        n=n,
        bound_b=bound_b,
        epsilon=config.epsilon,
        loss=spec,
        top1_fallback=config.top1_fallback,
        risk_curve=tuple(sorted(probes.items())),
        created_at=created_at or "",
    )
