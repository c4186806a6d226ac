# test_metrics.py

import numpy as np
import pytest

from core.errors import MetricError, ValidationError
from core.metrics import (
    aggregate,
    box_stats,
    evaluate,
    mae,
    prediction_accuracy,
    r2,
    r2_determination,
    relrmse,
    rmse,
)

PRED = [2.0, 2.0, 2.0]
ACTUAL = [1.0, 2.0, 3.0]


def test_constant_prediction_fixture():
    assert mae(PRED, ACTUAL) == pytest.approx(2 / 3)
    assert rmse(PRED, ACTUAL) == pytest.approx(0.81650, abs=1e-5)
    assert relrmse(PRED, ACTUAL) == pytest.approx(0.40825, abs=1e-5)
    assert prediction_accuracy(PRED, ACTUAL) == pytest.approx(1.22222, abs=1e-5)
    with pytest.raises(MetricError, match="constant sequence"):
        r2(PRED, ACTUAL)


def test_trial_report_scores_constant_prediction_as_zero():
    report = evaluate(PRED, ACTUAL)
    assert report.constant_prediction
    assert report.r2 == 0.0
    assert report.mae == pytest.approx(2 / 3)
    assert not evaluate([1.0, 2.5, 2.0], ACTUAL).constant_prediction
    with pytest.raises(MetricError, match="constant sequence"):
        evaluate([1.0, 2.0, 3.0], [2.0, 2.0, 2.0])


def test_perfect_prediction():
    actual = [120.0, 340.0, 800.0, 55.0]
    report = evaluate(actual, actual)
    assert report.mae == 0.0 and report.rmse == 0.0
    assert report.r2 == pytest.approx(1.0)
    assert report.prediction_accuracy == pytest.approx(1.0)
    assert report.n == 4


def test_doubled_prediction():
    actual = np.array([120.0, 340.0, 800.0, 55.0])
    assert prediction_accuracy(2 * actual, actual) == pytest.approx(2.0)
    assert r2(2 * actual, actual) == pytest.approx(1.0)
    assert r2_determination(2 * actual, actual) < 0


def test_r2_ignores_affine_maps(rng):
    actual = rng.uniform(50, 900, 40)
    pred = actual + rng.normal(0, 80, 40)
    assert r2(3.0 * pred + 17.0, actual) == pytest.approx(r2(pred, actual), rel=1e-12)


def test_mae_never_exceeds_rmse(rng):
    for _ in range(100):
        n = int(rng.integers(2, 30))
        pred, actual = rng.uniform(1, 100, n), rng.uniform(1, 100, n)
        assert mae(pred, actual) <= rmse(pred, actual) + 1e-12


def test_metrics_ignore_pair_order(rng):
    pred, actual = rng.uniform(1, 100, 25), rng.uniform(1, 100, 25)
    order = rng.permutation(25)
    a, b = evaluate(pred, actual), evaluate(pred[order], actual[order])
    for name in ("mae", "rmse", "relrmse", "r2", "prediction_accuracy"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-12)


def test_metric_input_checks():
    with pytest.raises(MetricError, match="3 predictions but 2"):
        mae([1, 2, 3], [1, 2])
    with pytest.raises(MetricError, match="at least 2"):
        rmse([1.0], [1.0])
    with pytest.raises(MetricError, match="index 1"):
        prediction_accuracy([1.0, 2.0], [1.0, 0.0])


# --- aggregation -----------------------------------------------------------

def test_aggregate_single_report():
    summary = aggregate([evaluate([1.0, 2.5, 2.0], [1.0, 2.0, 3.0])], trial_indices=[7])
    assert summary.count == 1
    assert not summary.std_defined
    assert summary.metrics["rmse"].std == 0.0
    assert summary.best_r2_trial == 7


def test_aggregate_tracks_extremes():
    actual = [1.0, 2.0, 3.0, 4.0]
    reports = [
        evaluate([1.0, 2.0, 3.0, 4.0], actual),
        evaluate([1.5, 2.0, 2.5, 4.5], actual),
        evaluate([1.0, 2.0, 3.0, 4.0], actual),
    ]
    summary = aggregate(reports)
    assert summary.std_defined
    assert summary.metrics["rmse"].max_trial == 1
    assert summary.metrics["rmse"].min_trial == 0
    assert summary.best_r2_trial == 0
    assert summary.to_dict()["metrics"]["mae"]["mean"] == pytest.approx(np.mean([r.mae for r in reports]))


def test_aggregate_counts_constant_predictions():
    reports = [evaluate([2.0, 2.0, 2.0], ACTUAL), evaluate([1.0, 2.5, 2.0], ACTUAL)]
    summary = aggregate(reports)
    assert summary.constant_predictions == 1
    assert summary.metrics["r2"].min == 0.0
    assert summary.best_r2_trial == 1
    assert summary.to_dict()["constant_predictions"] == 1


def test_aggregate_needs_reports():
    with pytest.raises(ValidationError):
        aggregate([])


# --- box charts -------------------------------------------------------------------

def test_box_stats_of_five():
    stats = box_stats([5, 1, 4, 2, 3])
    assert (stats.median, stats.q25, stats.q75) == (3.0, 2.0, 4.0)
    assert (stats.whisker_lo, stats.whisker_hi) == (1.0, 5.0)
    assert stats.outliers == ()


def test_box_stats_of_equal_values():
    stats = box_stats([1.1] * 6)
    assert stats.median == stats.q25 == stats.q75 == pytest.approx(1.1)
    assert stats.whisker_lo == stats.whisker_hi == pytest.approx(1.1)
    assert stats.outliers == ()


def test_box_stats_flags_outlier():
    stats = box_stats([1, 2, 3, 4, 100])
    assert stats.outliers == (100.0,)
    assert stats.whisker_hi == 4.0
    assert stats.to_dict()["outliers"] == [100.0]


def test_box_stats_needs_four_values():
    with pytest.raises(ValidationError, match="at least 4"):
        box_stats([1.0, 2.0, 3.0])
