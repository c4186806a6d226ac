# trial_runner.py
# One seeded trial = split -> scale -> transform -> fit -> predict -> back-transform -> metrics.
# Trials share nothing, so they run through a joblib pool and are re-ordered by index.

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from agents.registry import get_method
from core.dataset import DesignMatrix, ScalingParams, fit_scaler, scale, scale_array, split_indices
from core.errors import DissipateError, TrialFailureError, ValidationError
from core.metrics import MetricsReport, evaluate
from core.settings import ModelSettings
from core.transform import OutputTransform, make_transform, transform_from_dict

logger = logging.getLogger(__name__)

SEED_STRIDE = 2 ** 20
MAX_FAILURE_FRACTION = 0.01


def trial_seed(master_seed: int, index: int) -> int:
    """master_seed * 2**20 + index: injective over indices below 2**20."""
    if master_seed < 0:
        raise ValidationError(f"master seed must be >= 0, got {master_seed}")
    if not 0 <= index < SEED_STRIDE:
        raise ValidationError(f"trial index must be in [0, {SEED_STRIDE}), got {index}")
    return master_seed * SEED_STRIDE + index


@dataclass(frozen=True)
class TrialPlan:
    method: str
    transform: str = "log"
    feature_ids: tuple[str, ...] = ()
    settings: ModelSettings = field(default_factory=ModelSettings)
    train_fraction: float = 0.8
    # fitted transform shared by every trial ("global" fitting); None fits per trial
    fitted_transform: dict | None = None
    keep_model: bool = False


@dataclass(eq=False)
class TrialResult:
    index: int
    seed: int
    report: MetricsReport | None = None
    error: str | None = None
    weights: np.ndarray | None = None
    train_rows: tuple[str, ...] = ()
    test_rows: tuple[str, ...] = ()
    actual: np.ndarray | None = None
    predicted: np.ndarray | None = None
    predicted_std: np.ndarray | None = None
    scaler: ScalingParams | None = None
    transform: OutputTransform | None = None
    model: object = None

    @property
    def ok(self) -> bool:
        return self.error is None


def prepare_plan(data: DesignMatrix, plan: TrialPlan, transform_fit: str = "per-trial") -> TrialPlan:
    """Fill in defaults; with global fitting the target transform is fitted once on all targets."""
    if not plan.feature_ids:
        plan = replace(plan, feature_ids=data.feature_ids)
    if transform_fit == "global" and plan.fitted_transform is None:
        fitted = make_transform(plan.transform).fit(data.y)
        logger.info(f"target transform fitted on the full database: {fitted.tag}")
        plan = replace(plan, fitted_transform=fitted.to_dict())
    return plan


def run_trial(data: DesignMatrix, plan: TrialPlan, index: int, master_seed: int) -> TrialResult:
    """Run one trial. Only the training rows reach the scaler, the transform and the fit."""
    seed = trial_seed(master_seed, index)
    result = TrialResult(index=index, seed=seed)
    try:
        subset = data.subset(plan.feature_ids or data.feature_ids)
        train_idx, test_idx = split_indices(subset.m, seed, plan.train_fraction)
        train, test = subset.take(train_idx), subset.take(test_idx)
        result.train_rows, result.test_rows = train.row_ids, test.row_ids

        scaler = fit_scaler(train)
        if plan.fitted_transform is not None:
            transform = transform_from_dict(plan.fitted_transform)
        else:
            transform = make_transform(plan.transform).fit(train.y)
        fit_data = scale(train, scaler).with_y(transform.forward(train.y))

        method = get_method(plan.method)
        model = method.fit(fit_data, plan.settings, seed)
        X_test = scale_array(test.X, scaler)
        if hasattr(model, "predict_with_std"):
            mean, std = model.predict_with_std(X_test)
        else:
            mean, std = model.predict(X_test), None
        predicted = transform.inverse(mean)

        result.report = evaluate(predicted, test.y)
        result.actual, result.predicted, result.predicted_std = test.y.copy(), predicted, std
        result.scaler, result.transform = scaler, transform
        if method.has_weights:
            result.weights = model.feature_weights().values
        if plan.keep_model:
            result.model = model
    except (DissipateError, linalg.LinAlgError) as e:
        result.error = f"{type(e).__name__}: {e}"
    return result


class TrialRunner:
    """Runs the seeded trials of one plan over one design matrix.

    Any trial can be run again by index and comes back identical, which is how
    the best trial's model is recovered after the pool has finished.
    """

    def __init__(self, data: DesignMatrix, plan: TrialPlan, master_seed: int, workers: int = 1):
        self.data = data
        self.plan = plan
        self.master_seed = master_seed
        self.workers = workers

    def run_one(self, index: int, keep_model: bool = False) -> TrialResult:
        plan = replace(self.plan, keep_model=True) if keep_model else self.plan
        return run_trial(self.data, plan, index, self.master_seed)

    def run(self, trials: int) -> list[TrialResult]:
        """Run trials 0..trials-1; results come back sorted by trial index."""
        if trials < 1:
            raise ValidationError(f"trials must be >= 1, got {trials}")
        data, plan, seed = self.data, self.plan, self.master_seed
        if self.workers == 1:
            results = [run_trial(data, plan, i, seed) for i in range(trials)]
        else:
            results = Parallel(n_jobs=self.workers)(delayed(run_trial)(data, plan, i, seed) for i in range(trials))
        results = sorted(results, key=lambda r: r.index)
        self._log(results)
        return results

    def _log(self, results: Sequence[TrialResult]) -> None:
        for r in results:
            if not r.ok:
                logger.warning(f"trial {r.index} (seed {r.seed}) failed: {r.error}")
            elif r.report.constant_prediction:
                logger.warning(f"trial {r.index} (seed {r.seed}): constant prediction, R2 scored 0")
        done = sum(r.ok for r in results)
        features = len(self.plan.feature_ids or self.data.feature_ids)
        logger.info(f"{self.plan.method}: {done}/{len(results)} trials completed on {features} features")


def run_trials(
    data: DesignMatrix,
    plan: TrialPlan,
    trials: int,
    master_seed: int,
    workers: int = 1,
) -> list[TrialResult]:
    return TrialRunner(data, plan, master_seed, workers).run(trials)


def check_failures(results: Sequence[TrialResult], max_fraction: float = MAX_FAILURE_FRACTION) -> None:
    failures = [r for r in results if not r.ok]
    if len(failures) > max_fraction * len(results) or len(failures) == len(results):
        raise TrialFailureError(
            f"{len(failures)} of {len(results)} trials failed (limit {max_fraction:.0%}); "
            f"first: trial {failures[0].index}: {failures[0].error}",
            [(r.index, r.error) for r in failures],
        )


def mean_scores(results: Sequence[TrialResult]) -> tuple[float, float]:
    """Mean R2 and mean RELRMSE over the successful trials."""
    reports = [r.report for r in results if r.ok]
    if not reports:
        raise TrialFailureError(
            f"all {len(results)} trials failed; first: {results[0].error}",
            [(r.index, r.error) for r in results],
        )
    return (
        float(np.mean([rep.r2 for rep in reports])),
        float(np.mean([rep.relrmse for rep in reports])),
    )
