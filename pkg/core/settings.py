# settings.py
# Run configuration: built-in defaults < environment/.env < --config JSON < CLI flags.

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from dotenv import load_dotenv

from core.errors import ConfigError

load_dotenv()

METHODS = ("lr", "lasso", "nca", "gpr")
WEIGHTED_METHODS = ("nca", "gpr")
TRANSFORMS = ("none", "log", "boxcox")
TRANSFORM_FITS = ("per-trial", "global")
SELECTION_MODES = ("all", "ranked-forward", "sbe", "explicit")

# execution details that never change results
_NOT_DIGESTED = ("out_dir", "workers", "log_level")


@dataclass
class ModelSettings:
    gpr_restarts: int = 5
    nca_starts: int = 3
    nca_regularization: float | None = None  # None: 1/m of the training set
    nca_kernel_width: float = 1.0
    lasso_penalty: float | None = None  # None: cross-validated
    lasso_folds: int = 5


@dataclass
class RunConfig:
    db: str | None = None
    method: str = "gpr"
    transform: str = "log"
    transform_fit: str = "per-trial"
    trials: int = 1000
    ranking_trials: int = 100
    seed: int = 42
    selection: str = "all"
    features: list[str] | None = None
    tolerance: float = 0.005
    out_dir: str = "artifacts"
    workers: int = 1
    log_level: str = "INFO"
    curves_dir: str | None = None
    height_mm: float | None = None
    model: ModelSettings = field(default_factory=ModelSettings)

    def validate(self, required_paths: tuple[str, ...] = ()) -> "RunConfig":
        """Check enumerations, counts and (for the named fields) that input paths exist."""
        if self.method not in METHODS:
            raise ConfigError(f"unknown method '{self.method}' (choose from {', '.join(METHODS)})")
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"unknown transform '{self.transform}' (choose from {', '.join(TRANSFORMS)})")
        if self.transform_fit not in TRANSFORM_FITS:
            raise ConfigError(f"unknown transform fit mode '{self.transform_fit}'")
        if self.selection not in SELECTION_MODES:
            raise ConfigError(f"unknown selection mode '{self.selection}'")
        if self.trials < 1 or self.ranking_trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials} / {self.ranking_trials}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.workers == 0:
            raise ConfigError("workers must be a positive count or negative (joblib style)")
        if self.tolerance < 0:
            raise ConfigError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.height_mm is not None and self.height_mm <= 0:
            raise ConfigError(f"wall height must be > 0 mm, got {self.height_mm}")

        if self.selection == "explicit" and not self.features:
            raise ConfigError("explicit selection needs a feature list")
        if self.features is not None:
            from core.dataset import FEATURE_IDS

            unknown = [f for f in self.features if f not in FEATURE_IDS]
            if unknown:
                raise ConfigError(f"unknown feature(s): {', '.join(unknown)}")
            if len(set(self.features)) != len(self.features):
                raise ConfigError("feature list has duplicates")

        m = self.model
        if m.gpr_restarts < 1 or m.nca_starts < 1 or m.lasso_folds < 2:
            raise ConfigError("gpr_restarts and nca_starts must be >= 1, lasso_folds >= 2")
        if m.nca_kernel_width <= 0:
            raise ConfigError(f"NCA kernel width must be > 0, got {m.nca_kernel_width}")
        for name in ("nca_regularization", "lasso_penalty"):
            value = getattr(m, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value}")

        for name in required_paths:
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"--{name.replace('_', '-')} is required")
            if not Path(value).exists():
                raise ConfigError(f"{name}: {value} does not exist")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k not in _NOT_DIGESTED}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _env(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"environment variable {name}={raw!r} is not a valid {cast.__name__}")


def env_defaults() -> dict:
    return {
        "trials": _env("DISSIPATE_TRIALS", int, 1000),
        "ranking_trials": _env("DISSIPATE_RANKING_TRIALS", int, 100),
        "seed": _env("DISSIPATE_SEED", int, 42),
        "workers": _env("DISSIPATE_WORKERS", int, 1),
        "out_dir": _env("DISSIPATE_OUT_DIR", str, "artifacts"),
        "log_level": _env("DISSIPATE_LOG_LEVEL", str, "INFO"),
        "method": _env("DISSIPATE_METHOD", str, "gpr"),
        "transform": _env("DISSIPATE_TRANSFORM", str, "log"),
    }


def _read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path.name}: invalid JSON ({e})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path.name}: top level must be an object")
    return data


def load_config(config_file=None, **overrides) -> RunConfig:
    """Merge the configuration layers; `None` overrides are ignored."""
    values = env_defaults()
    model_values: dict = {}
    layers = [_read_config_file(config_file)] if config_file else []
    layers.append({k: v for k, v in overrides.items() if v is not None})

    run_fields = {f.name for f in fields(RunConfig)} - {"model"}
    model_fields = {f.name for f in fields(ModelSettings)}
    for layer in layers:
        for key, value in layer.items():
            if key == "model":
                if not isinstance(value, dict):
                    raise ConfigError("'model' must be an object")
                unknown = set(value) - model_fields
                if unknown:
                    raise ConfigError(f"unknown model setting(s): {', '.join(sorted(unknown))}")
                model_values.update(value)
            elif key in model_fields:
                model_values[key] = value
            elif key in run_fields:
                values[key] = value
            else:
                raise ConfigError(f"unknown configuration key '{key}'")

    for key in ("method", "transform"):
        values[key] = str(values[key]).lower()
    return RunConfig(**values, model=ModelSettings(**model_values))
