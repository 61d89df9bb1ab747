"""Calibration: acceptance condition, feasibility, bisection, artifact."""

import json
import math

import numpy as np
import pytest

from crcseg import (
    CalibrationArtifact,
    CalibrationConfig,
    Dims,
    EmptyCalibrationSet,
    GroundTruthMask,
    InfeasibleAlpha,
    ScoreTensor,
    binary,
    calibrate,
    crc_condition,
    empirical_risk,
    feasibility_check,
    min_feasible_alpha,
    min_feasible_n,
    miscoverage,
)
from helpers import grid_lambda_oracle, random_mask, random_scores


def one_pixel_example(p_true: float):
    """1-pixel, 2-class example whose binary loss jumps at lambda = 1 - p_true."""
    values = np.array([p_true, 1.0 - p_true], dtype=np.float32).reshape(2, 1, 1)
    scores = ScoreTensor(Dims(2, 1, 1), values)
    mask = GroundTruthMask.from_labels(np.zeros((1, 1), np.uint8), k=2)
    return scores, mask


def step_calibration_set():
    """Four examples with binary-loss jumps at 0.2, 0.4, 0.6, 0.8."""
    return [one_pixel_example(p) for p in (0.8, 0.6, 0.4, 0.2)]


def test_empirical_risk_mean_and_empty():
    assert empirical_risk([0.0, 1.0, 0.0, 1.0]) == 0.5
    assert empirical_risk([0.25]) == 0.25
    with pytest.raises(EmptyCalibrationSet):
        empirical_risk([])
    rng = np.random.default_rng(0)
    values = rng.uniform(0, 1, 100)
    assert empirical_risk(values) == pytest.approx(math.fsum(values) / 100, abs=1e-12)


def test_crc_condition_examples():
    assert crc_condition(0.0, n=4, bound_b=1.0, alpha=0.5)
    assert not crc_condition(0.0, n=4, bound_b=1.0, alpha=0.1)
    # boundary: exactly alpha clears
    assert crc_condition(0.0, n=99, bound_b=1.0, alpha=0.01)


def test_feasibility_carries_minimums():
    config = CalibrationConfig(alpha=0.1, loss=binary())
    with pytest.raises(InfeasibleAlpha) as excinfo:
        feasibility_check(config, n=4)
    err = excinfo.value
    assert err.min_alpha == pytest.approx(0.2)
    # smallest n with 1/(n+1) <= 0.1 is 9 (1/10 = 0.1 clears at the boundary)
    assert err.min_n == 9
    assert crc_condition(0.0, err.min_n, 1.0, 0.1)
    assert not crc_condition(0.0, err.min_n - 1, 1.0, 0.1)


def test_feasibility_boundary_cases():
    feasibility_check(CalibrationConfig(alpha=0.01, loss=binary()), n=99)
    with pytest.raises(InfeasibleAlpha):
        feasibility_check(CalibrationConfig(alpha=0.01, loss=binary()), n=98)
    assert min_feasible_n(0.01) == 99
    assert min_feasible_n(0.001) == 999
    assert min_feasible_alpha(4) == pytest.approx(0.2)


def test_config_validation():
    with pytest.raises(ValueError):
        CalibrationConfig(alpha=0.0, loss=binary())
    with pytest.raises(ValueError):
        CalibrationConfig(alpha=1.0, loss=binary())
    with pytest.raises(ValueError):
        CalibrationConfig(alpha=0.1, loss=binary(), epsilon=0.0)
    with pytest.raises(ValueError):
        CalibrationConfig(alpha=0.1, loss=binary(), epsilon=0.05)
    with pytest.raises(TypeError):
        CalibrationConfig(alpha=0.1, loss="binary")


def test_calibrate_empty_set():
    with pytest.raises(EmptyCalibrationSet):
        calibrate([], CalibrationConfig(alpha=0.5, loss=binary()))


def test_calibrate_perfect_predictor_returns_zero():
    examples = []
    for _ in range(4):
        values = np.array([1.0, 0.0, 0.0], dtype=np.float32).reshape(3, 1, 1)
        scores = ScoreTensor(Dims(3, 1, 1), values)
        mask = GroundTruthMask.from_labels(np.zeros((1, 1), np.uint8), k=3)
        examples.append((scores, mask))
    artifact = calibrate(examples, CalibrationConfig(alpha=0.5, loss=binary()))
    assert artifact.lambda_hat == 0.0


def test_calibrate_step_example_lands_just_above_the_jump():
    # with alpha=0.5 and n=4 the condition asks for risk <= 0.375, first
    # reached at the 0.6 jump; bisection returns within epsilon above it
    config = CalibrationConfig(alpha=0.5, loss=binary(), epsilon=1e-5, top1_fallback=False)
    artifact = calibrate(step_calibration_set(), config)
    assert 0.6 <= artifact.lambda_hat <= 0.6 + config.epsilon
    assert artifact.risk_at_lambda_hat() == 0.25


def test_calibrate_matches_grid_oracle_on_step_example():
    config = CalibrationConfig(alpha=0.5, loss=binary(), epsilon=1e-4, top1_fallback=False)
    artifact = calibrate(step_calibration_set(), config)
    oracle = grid_lambda_oracle(
        step_calibration_set(), binary(), alpha=0.5, step=1e-5, top1_fallback=False
    )
    assert abs(artifact.lambda_hat - oracle) <= config.epsilon


def test_calibrate_is_monotone_in_alpha():
    rng = np.random.default_rng(31)
    examples = [
        (random_scores(rng, 4, 8, 8), random_mask(rng, 4, 8, 8)) for _ in range(30)
    ]
    lambdas = []
    for alpha in (0.05, 0.1, 0.2, 0.4):
        config = CalibrationConfig(alpha=alpha, loss=miscoverage())
        lambdas.append(calibrate(examples, config).lambda_hat)
    assert lambdas == sorted(lambdas, reverse=True)


def test_calibrate_is_deterministic_and_thread_count_invariant():
    rng = np.random.default_rng(32)
    examples = [
        (random_scores(rng, 3, 10, 10), random_mask(rng, 3, 10, 10)) for _ in range(12)
    ]
    config = CalibrationConfig(alpha=0.2, loss=miscoverage())
    stamp = "2026-01-01T00:00:00+00:00"
    runs = [
        calibrate(examples, config, threads=threads, created_at=stamp)
        for threads in (1, 1, 8)
    ]
    assert runs[0].to_json() == runs[1].to_json() == runs[2].to_json()


def test_risk_curve_is_sorted_and_non_increasing():
    rng = np.random.default_rng(33)
    examples = [
        (random_scores(rng, 3, 8, 8), random_mask(rng, 3, 8, 8)) for _ in range(10)
    ]
    artifact = calibrate(examples, CalibrationConfig(alpha=0.3, loss=miscoverage()))
    lams = [l for l, _ in artifact.risk_curve]
    risks = [r for _, r in artifact.risk_curve]
    assert lams == sorted(lams)
    assert all(b <= a + 1e-12 for a, b in zip(risks, risks[1:]))
    assert artifact.lambda_hat in dict(artifact.risk_curve)


def test_artifact_json_round_trip_is_exact():
    rng = np.random.default_rng(34)
    examples = [
        (random_scores(rng, 3, 6, 6), random_mask(rng, 3, 6, 6)) for _ in range(8)
    ]
    artifact = calibrate(examples, CalibrationConfig(alpha=0.25, loss=miscoverage()))
    loaded = CalibrationArtifact.from_json(artifact.to_json())
    assert loaded.lambda_hat == artifact.lambda_hat
    assert loaded.risk_curve == artifact.risk_curve
    assert loaded.loss == artifact.loss
    assert loaded.to_json() == artifact.to_json()


def test_artifact_rejects_tampered_risk():
    rng = np.random.default_rng(35)
    examples = [
        (random_scores(rng, 3, 6, 6), random_mask(rng, 3, 6, 6)) for _ in range(8)
    ]
    artifact = calibrate(examples, CalibrationConfig(alpha=0.25, loss=miscoverage()))
    data = json.loads(artifact.to_json())
    data["alpha"] = 0.0001  # stored risk can no longer satisfy the condition
    with pytest.raises(Exception):
        CalibrationArtifact.from_json(json.dumps(data))


def test_calibrated_risk_satisfies_the_corrected_condition():
    rng = np.random.default_rng(36)
    for trial in range(5):
        examples = [
            (random_scores(rng, 3, 8, 8), random_mask(rng, 3, 8, 8)) for _ in range(20)
        ]
        config = CalibrationConfig(alpha=0.15, loss=miscoverage())
        artifact = calibrate(examples, config)
        assert crc_condition(
            artifact.risk_at_lambda_hat(), artifact.n, artifact.bound_b, artifact.alpha
        )
