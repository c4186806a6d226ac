# selection.py
# Feature ranking over repeated trials, ranked forward-addition curves and
# greedy sequential backward elimination.

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from agents.registry import get_method
from core.dataset import DesignMatrix
from core.errors import ValidationError
from core.settings import ModelSettings
from core.trial_runner import TrialPlan, check_failures, mean_scores, prepare_plan, run_trials

logger = logging.getLogger(__name__)

LINEAR_REJECTION = "linear methods are not assessed in terms of feature weights"


@dataclass(frozen=True, eq=False)
class FeatureRanking:
    feature_ids: tuple[str, ...]
    mean_weights: np.ndarray
    order: tuple[str, ...]
    trials: int
    method: str
    per_trial: np.ndarray  # (trials, features)
    trial_indices: tuple[int, ...]

    def weight_of(self, feature_id: str) -> float:
        return float(self.mean_weights[self.feature_ids.index(feature_id)])

    def heatmap_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.per_trial, columns=list(self.feature_ids))
        frame.insert(0, "trial", list(self.trial_indices))
        return frame

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "trials": self.trials,
            "order": list(self.order),
            "mean_weights": {f: float(w) for f, w in zip(self.feature_ids, self.mean_weights)},
        }


@dataclass(frozen=True)
class CurvePoint:
    size: int
    features: tuple[str, ...]
    mean_r2: float
    mean_relrmse: float
    removed: str | None = None


@dataclass(frozen=True)
class SelectionCurve:
    kind: str  # "forward" | "backward"
    method: str
    points: tuple[CurvePoint, ...]
    trace: tuple[dict, ...] = field(default=(), compare=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": [p.size for p in self.points],
                "mean_R2": [p.mean_r2 for p in self.points],
                "mean_RELRMSE": [p.mean_relrmse for p in self.points],
                "features": [";".join(p.features) for p in self.points],
            }
        )


def _require_weights(method: str) -> None:
    if not get_method(method).has_weights:
        raise ValidationError(f"{LINEAR_REJECTION} (method '{method}')")


def _canonical(data: DesignMatrix, features: Sequence[str]) -> tuple[str, ...]:
    """Features in the design matrix's column order, so equal sets give equal trials."""
    chosen = set(features)
    return tuple(f for f in data.feature_ids if f in chosen)


def score_subset(
    data: DesignMatrix,
    features: Sequence[str],
    method: str,
    trials: int,
    seed: int,
    settings: ModelSettings | None = None,
    transform: str = "log",
    workers: int = 1,
) -> tuple[float, float]:
    """Mean R2 and mean RELRMSE of `method` on a feature subset over seeded trials."""
    plan = prepare_plan(data, TrialPlan(method, transform, _canonical(data, features), settings or ModelSettings()))
    results = run_trials(data, plan, trials, seed, workers)
    check_failures(results)
    return mean_scores(results)


def rank_features(
    data: DesignMatrix,
    method: str,
    trials: int = 100,
    seed: int = 42,
    settings: ModelSettings | None = None,
    transform: str = "log",
    workers: int = 1,
) -> FeatureRanking:
    """Average normalized weights over seeded trials and rank them.

    Equal mean weights keep the design matrix's column order.
    """
    _require_weights(method)
    plan = prepare_plan(data, TrialPlan(method, transform, data.feature_ids, settings or ModelSettings()))
    results = run_trials(data, plan, trials, seed, workers)
    check_failures(results)

    ok = [r for r in results if r.ok]
    per_trial = np.vstack([r.weights for r in ok])
    mean = per_trial.mean(axis=0)
    order = np.lexsort((np.arange(mean.size), -mean))
    ranking = FeatureRanking(
        feature_ids=data.feature_ids,
        mean_weights=mean,
        order=tuple(data.feature_ids[i] for i in order),
        trials=len(ok),
        method=method,
        per_trial=per_trial,
        trial_indices=tuple(r.index for r in ok),
    )
    logger.info(f"{method} ranking: {', '.join(ranking.order)}")
    return ranking


def forward_add_curve(
    data: DesignMatrix,
    ranking: FeatureRanking,
    method: str,
    trials: int,
    seed: int,
    settings: ModelSettings | None = None,
    transform: str = "log",
    workers: int = 1,
) -> SelectionCurve:
    """Evaluate the top-k ranked features for k = 1..n with the same trial seeds for every k."""
    if set(ranking.order) != set(data.feature_ids):
        raise ValidationError("ranking does not cover the design matrix features")
    points = []
    for k in range(1, len(ranking.order) + 1):
        features = ranking.order[:k]
        r2, relrmse = score_subset(data, features, method, trials, seed, settings, transform, workers)
        points.append(CurvePoint(k, tuple(features), r2, relrmse))
        logger.info(f"forward k={k}: mean R2 {r2:.4f}, mean RELRMSE {relrmse:.4f}")
    return SelectionCurve("forward", method, tuple(points))


def backward_eliminate(
    data: DesignMatrix,
    method: str,
    trials: int,
    seed: int,
    settings: ModelSettings | None = None,
    transform: str = "log",
    workers: int = 1,
) -> SelectionCurve:
    """Greedy backward elimination down to one feature.

    Each step drops the feature whose removal leaves the highest mean R2;
    ties go to the lower mean RELRMSE, then to the later column. Hyperparameters
    are re-fitted for every candidate subset.
    """
    if data.n < 2:
        raise ValidationError(f"backward elimination needs at least 2 features, got {data.n}")
    position = {f: i for i, f in enumerate(data.feature_ids)}
    remaining = list(data.feature_ids)
    r2, relrmse = score_subset(data, remaining, method, trials, seed, settings, transform, workers)
    points = [CurvePoint(len(remaining), tuple(remaining), r2, relrmse)]
    trace = []

    while len(remaining) > 1:
        candidates = []
        for feature in remaining:
            subset = [f for f in remaining if f != feature]
            c_r2, c_rel = score_subset(data, subset, method, trials, seed, settings, transform, workers)
            candidates.append({"feature": feature, "mean_r2": c_r2, "mean_relrmse": c_rel})
        chosen = min(candidates, key=lambda c: (-c["mean_r2"], c["mean_relrmse"], -position[c["feature"]]))

        remaining.remove(chosen["feature"])
        points.append(
            CurvePoint(len(remaining), tuple(remaining), chosen["mean_r2"], chosen["mean_relrmse"], chosen["feature"])
        )
        trace.append(
            {
                "step": len(trace) + 1,
                "removed": chosen["feature"],
                "remaining": list(remaining),
                "mean_r2": chosen["mean_r2"],
                "mean_relrmse": chosen["mean_relrmse"],
                "candidates": candidates,
            }
        )
        logger.info(f"SBE removed {chosen['feature']} -> {len(remaining)} features, mean R2 {chosen['mean_r2']:.4f}")

    return SelectionCurve("backward", method, tuple(sorted(points, key=lambda p: p.size)), tuple(trace))


def select_best_subset(curve: SelectionCurve, tolerance: float = 0.005) -> tuple[str, ...]:
    """Smallest subset whose mean R2 is within `tolerance` of the curve's best."""
    if not curve.points:
        raise ValidationError("selection curve is empty")
    best = max(p.mean_r2 for p in curve.points)
    eligible = [p for p in curve.points if p.mean_r2 >= best - tolerance]
    return min(eligible, key=lambda p: p.size).features
