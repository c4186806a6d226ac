# dataset.py
# Wall specimen schema, CSV ingest, missing-detail conventions, feature scaling and splits.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from core.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureSpec:
    id: str
    column: str
    unit: str
    minimum: float
    maximum: float
    lower: str  # "positive" | "nonnegative" | "fraction"


# Database ranges of the 312-specimen wall collection; sampling bounds for synthetic data too.
FEATURES: tuple[FeatureSpec, ...] = (
    FeatureSpec("l_w", "lw_mm", "mm", 400.0, 3500.0, "positive"),
    FeatureSpec("h_w", "hw_mm", "mm", 500.0, 12000.0, "positive"),
    FeatureSpec("t_w", "tw_mm", "mm", 26.0, 300.0, "positive"),
    FeatureSpec("f_c", "fc_MPa", "MPa", 12.35, 117.0, "positive"),
    FeatureSpec("f_yt", "fyt_MPa", "MPa", 216.0, 1001.0, "positive"),
    FeatureSpec("f_ysh", "fysh_MPa", "MPa", 0.0, 1262.0, "nonnegative"),
    FeatureSpec("f_yl", "fyl_MPa", "MPa", 216.0, 1001.0, "positive"),
    FeatureSpec("f_ybl", "fybl_MPa", "MPa", 0.0, 1450.8, "nonnegative"),
    FeatureSpec("rho_t", "rho_t_pct", "%", 0.11, 2.42, "nonnegative"),
    FeatureSpec("rho_sh", "rho_sh_pct", "%", 0.0, 9.57, "nonnegative"),
    FeatureSpec("rho_l", "rho_l_pct", "%", 0.13, 3.29, "nonnegative"),
    FeatureSpec("rho_bl", "rho_bl_pct", "%", 0.0, 13.04, "nonnegative"),
    FeatureSpec("axial_load_ratio", "alr", "-", 0.0, 0.5, "fraction"),
    FeatureSpec("b_0", "b0_mm", "mm", 50.0, 1500.0, "positive"),
    FeatureSpec("d_b", "db_mm", "mm", 0.0, 590.8, "nonnegative"),
    FeatureSpec("s_over_db", "s_over_db", "-", 0.0, 52.08, "nonnegative"),
    FeatureSpec("aspect_ratio", "ar", "-", 0.33, 7.38, "positive"),
    FeatureSpec("shear_span_ratio", "shear_span_ratio", "-", 0.33, 7.38, "positive"),
)
FEATURE_IDS: tuple[str, ...] = tuple(f.id for f in FEATURES)
FEATURE_BY_ID = {f.id: f for f in FEATURES}

SHAPES = ("rectangular", "barbell", "flanged")
FAILURE_MODES = ("shear", "shear_flexure", "flexure")

ID_COLUMN, SHAPE_COLUMN, MODE_COLUMN, TARGET_COLUMN = "id", "shape", "failure_mode", "ncde"
CSV_COLUMNS = (ID_COLUMN, SHAPE_COLUMN, MODE_COLUMN, *(f.column for f in FEATURES), TARGET_COLUMN)
FLAG_COLUMNS = ("has_boundary", "has_stirrups", "s_mm")

# blanks allowed here when a convention flag fills them
_CONVENTION_FILLED = {"b_0", "d_b", "s_over_db"}
_TRUE = {"1", "true", "yes", "y"}
_FALSE = {"0", "false", "no", "n"}


@dataclass(frozen=True)
class WallSpecimen:
    id: str
    section_shape: str
    l_w: float
    h_w: float
    t_w: float
    f_c: float
    f_yt: float
    f_ysh: float
    f_yl: float
    f_ybl: float
    rho_t: float
    rho_sh: float
    rho_l: float
    rho_bl: float
    axial_load_ratio: float
    b_0: float
    d_b: float
    s_over_db: float
    aspect_ratio: float
    shear_span_ratio: float
    ncde: float | None = None
    failure_mode: str | None = None
    has_boundary: bool | None = None
    has_stirrups: bool | None = None
    stirrup_spacing: float | None = None
    row: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def features(self, feature_ids: Sequence[str] = FEATURE_IDS) -> np.ndarray:
        return np.array([getattr(self, f) for f in feature_ids], dtype=float)

    @property
    def where(self) -> str:
        return f"row {self.row}" if self.row is not None else f"specimen {self.id}"


def apply_conventions(raw: WallSpecimen) -> WallSpecimen:
    """Fill boundary-element and stirrup details the source records leave out.

    No boundary element: b_0 = t_w and d_b = 0. No stirrups: spacing equals the
    wall height before s/d_b is formed (0 when d_b is 0). Idempotent.
    """
    spec = raw
    if spec.has_boundary is False:
        spec = replace(spec, b_0=spec.t_w, d_b=0.0)

    spacing = spec.stirrup_spacing
    if spec.has_stirrups is False:
        spacing = spec.h_w
    elif spacing is None or not math.isnan(spec.s_over_db):
        return spec

    ratio = spacing / spec.d_b if spec.d_b > 0 else 0.0
    return replace(spec, stirrup_spacing=spacing, s_over_db=ratio)


def _flag(value, column: str, row: int) -> bool | None:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    text = str(value).strip().lower()
    if text == "":
        return None
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValidationError(f"row {row}, column {column}: expected a yes/no flag, got {value!r}")


def _number(value, column: str, row: int, allow_blank: bool = False) -> float:
    text = "" if value is None else str(value).strip()
    if text == "" or text.lower() == "nan":
        if allow_blank:
            return math.nan
        raise ValidationError(f"row {row}, column {column}: missing value")
    try:
        number = float(text)
    except ValueError:
        raise ValidationError(f"row {row}, column {column}: non-numeric value {text!r}")
    if not math.isfinite(number):
        raise ValidationError(f"row {row}, column {column}: non-finite value {text!r}")
    return number


def _check_physical(spec: WallSpecimen) -> None:
    for f in FEATURES:
        value = getattr(spec, f.id)
        if math.isnan(value):
            raise ValidationError(f"{spec.where}, column {f.column}: missing value")
        if f.lower == "positive" and value <= 0:
            raise ValidationError(f"{spec.where}, column {f.column}: must be > 0, got {value}")
        if f.lower == "nonnegative" and value < 0:
            raise ValidationError(f"{spec.where}, column {f.column}: must be >= 0, got {value}")
        if f.lower == "fraction" and not 0 <= value < 1:
            raise ValidationError(f"{spec.where}, column {f.column}: must be in [0, 1), got {value}")


def _warn_out_of_bounds(spec: WallSpecimen, slack: float) -> None:
    for f in FEATURES:
        value = getattr(spec, f.id)
        pad = slack * (f.maximum - f.minimum)
        if value < f.minimum - pad or value > f.maximum + pad:
            logger.warning(
                f"{spec.where} ({spec.id}): {f.column}={value:g} outside database range "
                f"[{f.minimum:g}, {f.maximum:g}]"
            )


def load_specimens(path, require_target: bool = True, slack: float = 0.05) -> list[WallSpecimen]:
    """Parse and validate a walls CSV. Rows are numbered as in the file (header is row 1)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path} does not exist")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)

    required = [ID_COLUMN, SHAPE_COLUMN, *(f.column for f in FEATURES)]
    if require_target:
        required.append(TARGET_COLUMN)
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path.name}: missing required column(s) {', '.join(missing)}")
    known = set(CSV_COLUMNS) | set(FLAG_COLUMNS)
    extra_columns = [c for c in frame.columns if c not in known]

    specimens = []
    seen_ids: dict[str, int] = {}
    for offset, record in enumerate(frame.to_dict(orient="records")):
        row = offset + 2
        specimen_id = str(record[ID_COLUMN]).strip()
        if not specimen_id:
            raise ValidationError(f"row {row}, column {ID_COLUMN}: empty id")
        if specimen_id in seen_ids:
            raise ValidationError(f"row {row}: duplicate id {specimen_id!r} (first at row {seen_ids[specimen_id]})")
        seen_ids[specimen_id] = row

        shape = str(record[SHAPE_COLUMN]).strip().lower()
        if shape not in SHAPES:
            raise ValidationError(f"row {row}, column {SHAPE_COLUMN}: unknown section shape {shape!r}")
        mode = str(record.get(MODE_COLUMN, "") or "").strip().lower() or None
        if mode is not None and mode not in FAILURE_MODES:
            raise ValidationError(f"row {row}, column {MODE_COLUMN}: unknown failure mode {mode!r}")

        has_boundary = _flag(record.get("has_boundary"), "has_boundary", row)
        has_stirrups = _flag(record.get("has_stirrups"), "has_stirrups", row)
        spacing = None
        if str(record.get("s_mm", "") or "").strip():
            spacing = _number(record["s_mm"], "s_mm", row)

        values = {}
        for f in FEATURES:
            fillable = f.id in _CONVENTION_FILLED and (
                has_boundary is False or has_stirrups is False or spacing is not None
            )
            values[f.id] = _number(record[f.column], f.column, row, allow_blank=fillable)

        target = None
        target_text = str(record.get(TARGET_COLUMN, "") or "").strip()
        if require_target or target_text:
            target = _number(record.get(TARGET_COLUMN), TARGET_COLUMN, row)
            if target <= 0:
                raise ValidationError(f"row {row}: ncde must be > 0, got {target}")

        specimen = apply_conventions(
            WallSpecimen(
                id=specimen_id,
                section_shape=shape,
                ncde=target,
                failure_mode=mode,
                has_boundary=has_boundary,
                has_stirrups=has_stirrups,
                stirrup_spacing=spacing,
                row=row,
                extra={c: record[c] for c in extra_columns},
                **values,
            )
        )
        _check_physical(specimen)
        _warn_out_of_bounds(specimen, slack)
        specimens.append(specimen)

    logger.info(f"loaded {len(specimens)} specimens from {path.name}")
    return specimens


def write_specimens(specimens: Sequence[WallSpecimen], path) -> Path:
    """Write specimens back in the documented column order."""
    path = Path(path)
    rows = []
    for s in specimens:
        row = {ID_COLUMN: s.id, SHAPE_COLUMN: s.section_shape, MODE_COLUMN: s.failure_mode or ""}
        row.update({f.column: repr(float(getattr(s, f.id))) for f in FEATURES})
        row[TARGET_COLUMN] = "" if s.ncde is None else repr(float(s.ncde))
        row.update(s.extra)
        rows.append(row)
    frame = pd.DataFrame(rows)
    ordered = list(CSV_COLUMNS) + [c for c in frame.columns if c not in CSV_COLUMNS]
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.reindex(columns=ordered).to_csv(path, index=False, lineterminator="\n")
    return path


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    feature_ids: tuple[str, ...]
    row_ids: tuple[str, ...]

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise ValidationError(f"design matrix must be 2-D, got shape {X.shape}")
        m, n = X.shape
        if m < 2:
            raise ValidationError(f"design matrix needs at least 2 rows, got {m}")
        if y.size != m or len(self.row_ids) != m:
            raise ValidationError(f"{m} rows but {y.size} targets and {len(self.row_ids)} row ids")
        if len(self.feature_ids) != n:
            raise ValidationError(f"{n} columns but {len(self.feature_ids)} feature ids")
        bad = np.argwhere(~np.isfinite(X))
        if bad.size:
            r, c = bad[0]
            raise ValidationError(f"non-finite entry at row {self.row_ids[r]}, feature {self.feature_ids[c]}")
        if not np.all(np.isfinite(y)):
            raise ValidationError(f"non-finite target at row {self.row_ids[int(np.flatnonzero(~np.isfinite(y))[0])]}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def subset(self, feature_ids: Sequence[str]) -> "DesignMatrix":
        missing = [f for f in feature_ids if f not in self.feature_ids]
        if missing:
            raise ValidationError(f"feature(s) not in design matrix: {', '.join(missing)}")
        cols = [self.feature_ids.index(f) for f in feature_ids]
        return DesignMatrix(self.X[:, cols], self.y, tuple(feature_ids), self.row_ids)

    def take(self, rows) -> "DesignMatrix":
        rows = np.asarray(rows, dtype=int)
        return DesignMatrix(self.X[rows], self.y[rows], self.feature_ids, tuple(self.row_ids[i] for i in rows))

    def with_X(self, X) -> "DesignMatrix":
        return DesignMatrix(X, self.y, self.feature_ids, self.row_ids)

    def with_y(self, y) -> "DesignMatrix":
        return DesignMatrix(self.X, y, self.feature_ids, self.row_ids)


def design_matrix(specimens: Sequence[WallSpecimen], feature_ids: Sequence[str] | None = None) -> DesignMatrix:
    feature_ids = tuple(feature_ids or FEATURE_IDS)
    missing_target = [s.where for s in specimens if s.ncde is None]
    if missing_target:
        raise ValidationError(f"no ncde target at {missing_target[0]}")
    return DesignMatrix(
        X=np.array([s.features(feature_ids) for s in specimens], dtype=float).reshape(len(specimens), -1),
        y=np.array([s.ncde for s in specimens], dtype=float),
        feature_ids=feature_ids,
        row_ids=tuple(s.id for s in specimens),
    )


@dataclass(frozen=True, eq=False)
class ScalingParams:
    feature_ids: tuple[str, ...]
    minimum: np.ndarray
    maximum: np.ndarray

    def to_dict(self) -> dict:
        return {
            "feature_ids": list(self.feature_ids),
            "min": [float(v) for v in self.minimum],
            "max": [float(v) for v in self.maximum],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingParams":
        return cls(tuple(data["feature_ids"]), np.asarray(data["min"], float), np.asarray(data["max"], float))


def fit_scaler(train: DesignMatrix) -> ScalingParams:
    """Per-feature extrema of the training rows only."""
    lo = train.X.min(axis=0)
    hi = train.X.max(axis=0)
    constant = [f for f, a, b in zip(train.feature_ids, lo, hi) if not b > a]
    if constant:
        raise ValidationError(f"constant feature(s) in training set: {', '.join(constant)}")
    return ScalingParams(train.feature_ids, lo, hi)


def _check_features(feature_ids, params: ScalingParams) -> None:
    if tuple(feature_ids) != params.feature_ids:
        raise ValidationError(
            f"feature set mismatch: scaler fitted on {list(params.feature_ids)}, got {list(feature_ids)}"
        )


def scale_array(X, params: ScalingParams) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return 2.0 * (X - params.minimum) / (params.maximum - params.minimum) - 1.0


def unscale_array(Z, params: ScalingParams) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    return (Z + 1.0) / 2.0 * (params.maximum - params.minimum) + params.minimum


def scale(matrix: DesignMatrix, params: ScalingParams) -> DesignMatrix:
    """Map training extrema to [-1, 1]. Values outside the training range are not clipped."""
    _check_features(matrix.feature_ids, params)
    return matrix.with_X(scale_array(matrix.X, params))


def unscale(matrix: DesignMatrix, params: ScalingParams) -> DesignMatrix:
    _check_features(matrix.feature_ids, params)
    return matrix.with_X(unscale_array(matrix.X, params))


def out_of_range(X, params: ScalingParams) -> list[tuple[int, str]]:
    """(row, feature) pairs lying outside the scaler's training range."""
    Z = scale_array(X, params)
    rows, cols = np.nonzero((Z < -1.0) | (Z > 1.0))
    return [(int(r), params.feature_ids[c]) for r, c in zip(rows, cols)]


def split_indices(m: int, seed: int, train_fraction: float = 0.8) -> tuple[np.ndarray, np.ndarray]:
    """Seeded permutation; the first ceil(fraction * m) positions train. Both index sets sorted."""
    if m < 5:
        raise ValidationError(f"need at least 5 specimens to split, got {m}")
    if not 0 < train_fraction < 1:
        raise ValidationError(f"train fraction must be in (0, 1), got {train_fraction}")
    n_train = math.ceil(round(train_fraction * m, 9))
    n_train = min(max(n_train, 1), m - 1)
    order = np.random.default_rng(seed).permutation(m)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def split(specimens, seed: int, train_fraction: float = 0.8):
    """Train/test partition of specimens or of a DesignMatrix."""
    m = specimens.m if isinstance(specimens, DesignMatrix) else len(specimens)
    train_idx, test_idx = split_indices(m, seed, train_fraction)
    if isinstance(specimens, DesignMatrix):
        return specimens.take(train_idx), specimens.take(test_idx)
    return [specimens[i] for i in train_idx], [specimens[i] for i in test_idx]
