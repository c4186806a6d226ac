# controller.py
# Command orchestration: every `dissipate <command>` lands in one cmd_* function here.
# Trials run in the pool; files are written only from this single context afterwards.

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from agents.registry import get_method
from core.dataset import FEATURE_IDS, WallSpecimen, design_matrix, load_specimens
from core.errors import ConfigError, DissipateError, MetricError, ValidationError
from core.hysteresis import LoadDisplacementHistory, energy_report
from core.metrics import BOX_MIN_VALUES, aggregate, box_stats, evaluate
from core.selection import (
    LINEAR_REJECTION,
    backward_eliminate,
    forward_add_curve,
    rank_features,
    select_best_subset,
)
from core.settings import WEIGHTED_METHODS, RunConfig
from core.transform import BoxCoxTransform, log_apply, probability_plot
from core.trial_runner import TrialPlan, TrialRunner, check_failures, prepare_plan
from messaging.model_store import load_model, save_model
from messaging.report_writer import ReportWriter

logger = logging.getLogger(__name__)

UNASSIGNED = "unassigned"


def _metadata(specimens: list[WallSpecimen]) -> dict[str, WallSpecimen]:
    return {s.id: s for s in specimens}


def cmd_energy(config: RunConfig) -> tuple[pd.DataFrame, list[dict]]:
    """NCDE for every `*.csv` curve in `curves_dir`.

    Wall heights come from `height_mm` or, per specimen id (the file stem), from
    the database CSV in `db`. Failing files are collected and the rest still run.
    """
    config.validate(("curves_dir",))
    curves = sorted(Path(config.curves_dir).glob("*.csv"))
    if not curves:
        raise ValidationError(f"no curve files (*.csv) in {config.curves_dir}")
    heights = {}
    if config.db:
        heights = {s.id: s.h_w for s in load_specimens(config.db, require_target=False)}
    elif config.height_mm is None:
        raise ConfigError("wall heights needed: pass --height or --db")

    writer = ReportWriter(config.out_dir)
    rows, failures = [], []
    for path in curves:
        specimen_id = path.stem
        try:
            height = config.height_mm if config.height_mm is not None else heights.get(specimen_id)
            if height is None:
                raise ValidationError(f"no wall height for specimen {specimen_id!r}")
            report = energy_report(LoadDisplacementHistory.from_csv(path, height, specimen_id))
        except DissipateError as e:
            logger.warning(f"{path.name}: {e}")
            failures.append({"file": path.name, "error": str(e)})
            continue

        writer.json(f"energy_{specimen_id}.json", report.to_dict())
        rows.append(
            {
                "id": specimen_id,
                "cycles": report.cycle_count,
                "partials": report.partial_count,
                "total_energy_kNmm": report.total_energy,
                "total_drift_pct": report.total_drift,
                "ncde": report.ncde,
                "has_partial": report.partial_count > 0,
            }
        )
        logger.info(f"{specimen_id}: {report.cycle_count} cycles, NCDE {report.ncde:.4g}")

    frame = pd.DataFrame(
        rows, columns=["id", "cycles", "partials", "total_energy_kNmm", "total_drift_pct", "ncde", "has_partial"]
    )
    writer.csv("ncde.csv", frame)
    if failures:
        writer.json("energy_failures.json", failures)
    writer.manifest("energy", config, [*curves, *([config.db] if config.db else [])])
    return frame, failures


def _load_matrix(config: RunConfig):
    specimens = load_specimens(config.db)
    return specimens, design_matrix(specimens, FEATURE_IDS)


def _select_features(config: RunConfig, data, writer: ReportWriter) -> tuple[str, ...]:
    """Resolve the feature subset, running ranking and selection curves when asked."""
    if config.selection == "all":
        return FEATURE_IDS
    if config.selection == "explicit":
        return tuple(f for f in FEATURE_IDS if f in set(config.features))
    if config.method not in WEIGHTED_METHODS:
        raise ConfigError(f"{LINEAR_REJECTION} (method '{config.method}')")

    common = dict(settings=config.model, transform=config.transform, workers=config.workers)
    # 1. Rank features by their mean normalized weight
    ranking = rank_features(data, config.method, config.ranking_trials, config.seed, **common)
    writer.csv("weights_heatmap.csv", ranking.heatmap_frame())
    writer.json("ranking.json", ranking.to_dict())

    # 2. Performance curve over subset sizes
    if config.selection == "sbe":
        curve = backward_eliminate(data, config.method, config.trials, config.seed, **common)
        writer.json("sbe_trace.json", list(curve.trace))
    else:
        curve = forward_add_curve(data, ranking, config.method, config.trials, config.seed, **common)
    writer.csv("curve.csv", curve.to_frame())

    # 3. Smallest subset within tolerance of the best
    subset = select_best_subset(curve, config.tolerance)
    writer.json(
        "selection.json",
        {"mode": config.selection, "method": config.method, "tolerance": config.tolerance, "subset": list(subset)},
    )
    logger.info(f"selected {len(subset)} features: {', '.join(subset)}")
    return subset


def _prediction_frame(ids, meta: dict[str, WallSpecimen], actual, predicted, std=None) -> pd.DataFrame:
    frame = pd.DataFrame(
        {
            "id": list(ids),
            "shape": [meta[i].section_shape for i in ids],
            "failure_mode": [meta[i].failure_mode or "" for i in ids],
            "actual": actual,
            "predicted": predicted,
        }
    )
    frame["ratio"] = frame["predicted"] / frame["actual"]
    if std is not None:
        frame["std_transformed"] = std
    return frame


def cmd_evaluate(config: RunConfig) -> dict:
    """Seeded trial protocol for one method and transform; writes summary, best model and plots data."""
    config.validate(("db",))
    specimens, data = _load_matrix(config)
    writer = ReportWriter(config.out_dir)
    features = _select_features(config, data, writer)

    # 1. Trials
    plan = prepare_plan(data, TrialPlan(config.method, config.transform, features, config.model), config.transform_fit)
    runner = TrialRunner(data, plan, config.seed, config.workers)
    results = runner.run(config.trials)
    writer.csv(
        "trials.csv",
        pd.DataFrame(
            [
                {"trial": r.index, "seed": r.seed, **(r.report.to_dict() if r.ok else {}), "error": r.error or ""}
                for r in results
            ],
            columns=[
                "trial", "seed", "mae", "rmse", "relrmse", "r2", "prediction_accuracy", "n",
                "constant_prediction", "error",
            ],
        ),
    )
    check_failures(results)

    # 2. Aggregate
    ok = [r for r in results if r.ok]
    summary = aggregate([r.report for r in ok], [r.index for r in ok])
    document = {
        "method": config.method,
        "transform": config.transform,
        "transform_fit": config.transform_fit,
        "features": list(features),
        "trials": config.trials,
        "completed": len(ok),
        "failed": [{"trial": r.index, "error": r.error} for r in results if not r.ok],
        **summary.to_dict(),
    }

    # 3. Best trial: model, scatter and box chart data (re-run; the pool keeps no models)
    best = runner.run_one(summary.best_r2_trial, keep_model=True)
    meta = _metadata(specimens)
    save_model(
        Path(config.out_dir) / "best_model.json",
        config.method,
        best.model,
        best.scaler,
        best.transform,
        best.train_rows,
    )
    writer.track(Path(config.out_dir) / "best_model.json")
    scatter = _prediction_frame(best.test_rows, meta, best.actual, best.predicted, best.predicted_std)
    writer.csv("scatter.csv", scatter)
    ratios = scatter["ratio"].to_numpy()
    if ratios.size >= BOX_MIN_VALUES:
        writer.json("box_stats.json", box_stats(ratios).to_dict())
    else:
        reason = f"best trial has {ratios.size} test rows; box statistics need at least {BOX_MIN_VALUES}"
        logger.warning(f"box_stats.json skipped: {reason}")
        document.update(box_stats=None, box_stats_reason=reason)
    writer.json("summary.json", document)
    writer.manifest("evaluate", config, [config.db])

    r2 = summary.metrics["r2"]
    logger.info(f"{config.method}: mean R2 {r2.mean:.4f} (std {r2.std:.4f}), best {r2.max:.4f} at trial {summary.best_r2_trial}")
    return document


def cmd_select(config: RunConfig) -> tuple[str, ...]:
    """Rank features and pick a subset; linear methods are rejected."""
    config.validate(("db",))
    if not get_method(config.method).has_weights:
        raise ConfigError(f"{LINEAR_REJECTION} (method '{config.method}')")
    if config.selection == "all":
        config = replace(config, selection="sbe")
    _, data = _load_matrix(config)
    writer = ReportWriter(config.out_dir)
    subset = _select_features(config, data, writer)
    if config.selection == "explicit":
        writer.json("selection.json", {"mode": "explicit", "method": config.method, "subset": list(subset)})
    writer.manifest("select", config, [config.db])
    return subset


def cmd_predict(config: RunConfig, model_path, specimens_path) -> pd.DataFrame:
    """Predict NCDE for every row of a specimens CSV with a stored model."""
    for path in (model_path, specimens_path):
        if not Path(path).exists():
            raise ConfigError(f"{path} does not exist")
    stored = load_model(model_path)
    specimens = load_specimens(specimens_path, require_target=False)
    X = np.array([s.features(stored.feature_ids) for s in specimens], dtype=float)

    for row, feature in stored.out_of_range(X):
        logger.warning(f"{specimens[row].where} ({specimens[row].id}): {feature} outside the model's training range")
    predicted, std = stored.predict(X)

    ids = [s.id for s in specimens]
    actual = [s.ncde if s.ncde is not None else np.nan for s in specimens]
    frame = _prediction_frame(ids, _metadata(specimens), actual, predicted, std)
    writer = ReportWriter(config.out_dir)
    writer.csv("predictions.csv", frame)
    writer.manifest("predict", config, [model_path, specimens_path])
    return frame


def cmd_stratify(config: RunConfig, predictions_path, by: str = "failure_mode") -> dict:
    """Metrics per failure mode (or section shape) from a predictions/scatter CSV."""
    if by not in ("failure_mode", "shape"):
        raise ConfigError(f"cannot stratify by '{by}' (choose failure_mode or shape)")
    path = Path(predictions_path)
    if not path.exists():
        raise ConfigError(f"{path} does not exist")
    frame = pd.read_csv(path, keep_default_na=False, na_values=[""])
    missing = [c for c in ("actual", "predicted", by) if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path.name}: missing column(s) {', '.join(missing)}")
    frame = frame.dropna(subset=["actual", "predicted"])

    groups = {}
    labels = frame[by].fillna("").astype(str).str.strip().replace("", UNASSIGNED)
    for label in sorted(labels.unique(), key=lambda g: (g == UNASSIGNED, g)):
        part = frame[labels == label]
        entry = {"count": int(len(part))}
        try:
            entry.update(evaluate(part["predicted"].to_numpy(), part["actual"].to_numpy()).to_dict())
        except MetricError as e:
            entry["error"] = str(e)
        groups[label] = entry
        logger.info(f"{by}={label}: {entry['count']} rows" + (f", R2 {entry['r2']:.4f}" if "r2" in entry else ""))

    document = {"by": by, "source": path.name, "groups": groups}
    writer = ReportWriter(config.out_dir)
    writer.json(f"stratified_{by}.json", document)
    writer.manifest("stratify", config, [path])
    return document


def cmd_probplot(config: RunConfig) -> dict:
    """Normal probability plot data for raw, log and Box-Cox NCDE, plus the fitted lambda."""
    config.validate(("db",))
    specimens = load_specimens(config.db)
    y = np.array([s.ncde for s in specimens], dtype=float)
    boxcox = BoxCoxTransform().fit(y)

    writer = ReportWriter(config.out_dir)
    document = {"lambda": boxcox.params.lam, "n": int(y.size), "correlation": {}}
    for name, values in (("raw", y), ("log", log_apply(y)), ("boxcox", boxcox.forward(y))):
        plot = probability_plot(values)
        writer.csv(f"probplot_{name}.csv", plot.to_frame())
        document["correlation"][name] = plot.correlation
    writer.json("probplot.json", document)
    writer.manifest("probplot", config, [config.db])
    logger.info(f"Box-Cox lambda {boxcox.params.lam:.4f}; plot correlations {document['correlation']}")
    return document
