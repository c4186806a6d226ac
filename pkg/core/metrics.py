# metrics.py
# Point metrics for NCDE predictions, aggregation over trials, and box-chart statistics.

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from core.errors import MetricError, ValidationError

METRIC_NAMES = ("mae", "rmse", "relrmse", "r2", "prediction_accuracy")
# predictions spreading less than this fraction of their magnitude count as one value
CONSTANT_RTOL = 1e-12
BOX_MIN_VALUES = 4


def _pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.size != a.size:
        raise MetricError(f"{p.size} predictions but {a.size} actual values")
    if p.size < 2:
        raise MetricError(f"metrics need at least 2 pairs, got {p.size}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise MetricError("non-finite prediction or actual value")
    return p, a


def mae(pred, actual) -> float:
    p, a = _pair(pred, actual)
    return float(np.mean(np.abs(p - a)))


def rmse(pred, actual) -> float:
    p, a = _pair(pred, actual)
    return float(np.sqrt(np.mean((p - a) ** 2)))


def relrmse(pred, actual) -> float:
    """RMSE over the mean prediction."""
    p, a = _pair(pred, actual)
    mean_pred = float(np.mean(p))
    if mean_pred == 0:
        raise MetricError("RELRMSE undefined: zero mean prediction")
    return rmse(p, a) / mean_pred


def r2(pred, actual) -> float:
    """Squared Pearson correlation between predictions and actual values."""
    p, a = _pair(pred, actual)
    if np.ptp(p) == 0 or np.ptp(a) == 0:
        raise MetricError("undefined correlation: constant sequence")
    return float(np.clip(np.corrcoef(p, a)[0, 1] ** 2, 0.0, 1.0))


def r2_determination(pred, actual) -> float:
    """1 - SSE/SST; diagnostic only, can be negative."""
    p, a = _pair(pred, actual)
    sst = float(np.sum((a - a.mean()) ** 2))
    if sst == 0:
        raise MetricError("undefined determination: constant actual values")
    return 1.0 - float(np.sum((a - p) ** 2)) / sst


def prediction_accuracy(pred, actual) -> float:
    """Mean of predicted/actual ratios."""
    p, a = _pair(pred, actual)
    bad = np.flatnonzero(a <= 0)
    if bad.size:
        raise MetricError(f"prediction accuracy undefined: actual value at index {int(bad[0])} is {a[bad[0]]}")
    return float(np.mean(p / a))


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    relrmse: float
    r2: float
    prediction_accuracy: float
    n: int
    # the model predicted one value for every row; r2 is recorded as 0
    constant_prediction: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(pred, actual) -> MetricsReport:
    """All five metrics for one trial.

    A constant prediction has no correlation with anything, so R2 is scored 0
    and flagged instead of failing the trial. Constant actual values still raise.
    """
    p, a = _pair(pred, actual)
    constant = bool(np.ptp(p) <= CONSTANT_RTOL * np.max(np.abs(p))) and bool(np.ptp(a) > 0)
    return MetricsReport(
        mae=mae(p, a),
        rmse=rmse(p, a),
        relrmse=relrmse(p, a),
        r2=0.0 if constant else r2(p, a),
        prediction_accuracy=prediction_accuracy(p, a),
        n=int(p.size),
        constant_prediction=constant,
    )


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std: float
    min: float
    min_trial: int
    max: float
    max_trial: int


@dataclass(frozen=True)
class AggregateSummary:
    count: int
    metrics: dict[str, MetricStats]
    best_r2_trial: int
    std_defined: bool
    constant_predictions: int = 0

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "constant_predictions": self.constant_predictions,
            "best_r2_trial": self.best_r2_trial,
            "std_defined": self.std_defined,
            "metrics": {name: asdict(stats) for name, stats in self.metrics.items()},
        }


def aggregate(reports: Sequence[MetricsReport], trial_indices: Sequence[int] | None = None) -> AggregateSummary:
    """Mean, sample std (ddof=1) and extrema per metric over trials.

    A single report has no sample std; it is reported as 0 with
    `std_defined` False.
    """
    if not reports:
        raise ValidationError("aggregate needs at least one metrics report")
    indices = np.asarray(trial_indices if trial_indices is not None else range(len(reports)), dtype=int)
    if indices.size != len(reports):
        raise ValidationError(f"{len(reports)} reports but {indices.size} trial indices")

    std_defined = len(reports) > 1
    summary = {}
    for name in METRIC_NAMES:
        values = np.array([getattr(r, name) for r in reports], dtype=float)
        # first occurrence wins, so ties resolve to the lowest position
        lo, hi = int(np.argmin(values)), int(np.argmax(values))
        summary[name] = MetricStats(
            mean=float(values.mean()),
            std=float(values.std(ddof=1)) if std_defined else 0.0,
            min=float(values[lo]),
            min_trial=int(indices[lo]),
            max=float(values[hi]),
            max_trial=int(indices[hi]),
        )
    return AggregateSummary(
        count=len(reports),
        metrics=summary,
        best_r2_trial=summary["r2"].max_trial,
        std_defined=std_defined,
        constant_predictions=sum(r.constant_prediction for r in reports),
    )


@dataclass(frozen=True)
class BoxStats:
    median: float
    q25: float
    q75: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple[float, ...]
    mean: float
    std: float
    n: int

    def to_dict(self) -> dict:
        data = asdict(self)
        data["outliers"] = list(self.outliers)
        return data


def box_stats(ratios) -> BoxStats:
    """Quartiles by linear interpolation; whiskers reach the extreme points within 1.5 IQR."""
    values = np.sort(np.asarray(ratios, dtype=float).ravel())
    if values.size < BOX_MIN_VALUES:
        raise ValidationError(f"box statistics need at least {BOX_MIN_VALUES} values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValidationError("box statistics need finite values")

    q25, median, q75 = np.percentile(values, [25, 50, 75], method="linear")
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = values[(values >= lo_fence) & (values <= hi_fence)]
    outliers = values[(values < lo_fence) | (values > hi_fence)]
    return BoxStats(
        median=float(median),
        q25=float(q25),
        q75=float(q75),
        whisker_lo=float(inside.min()),
        whisker_hi=float(inside.max()),
        outliers=tuple(float(v) for v in outliers),
        mean=float(values.mean()),
        std=float(values.std(ddof=1)),
        n=int(values.size),
    )
