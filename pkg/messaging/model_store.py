# model_store.py
# Versioned JSON documents for fitted models: hyperparameters, scaler, target
# transform and (for kernel methods) the training data they predict from.

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from agents.gpr import GprModel, condition_gpr
from agents.linear import LassoModel, LinearModel
from agents.nca import NcaModel
from core.dataset import ScalingParams, out_of_range, scale_array
from core.errors import ValidationError
from core.transform import OutputTransform, transform_from_dict
from messaging.report_writer import dumps

FORMAT = "dissipate-model"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)


def training_digest(X, y) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(y, dtype="<f8").tobytes())
    return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class StoredModel:
    method: str
    model: object
    scaler: ScalingParams
    transform: OutputTransform
    digest: str

    @property
    def feature_ids(self) -> tuple[str, ...]:
        return self.scaler.feature_ids

    def out_of_range(self, X) -> list[tuple[int, str]]:
        return out_of_range(X, self.scaler)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray | None]:
        """Back-transformed predictions for raw feature rows, plus the GPR std in transformed units."""
        Z = scale_array(np.atleast_2d(np.asarray(X, dtype=float)), self.scaler)
        if isinstance(self.model, GprModel):
            mean, std = self.model.predict_with_std(Z)
        else:
            mean, std = self.model.predict(Z), None
        return self.transform.inverse(mean), std


def _training_arrays(model) -> tuple[np.ndarray, np.ndarray] | None:
    if isinstance(model, (NcaModel, GprModel)):
        return model.X_train, model.y_train
    return None


def save_model(path, method: str, model, scaler: ScalingParams, transform: OutputTransform, row_ids=()) -> Path:
    training = _training_arrays(model)
    document = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "method": method,
        "feature_ids": list(scaler.feature_ids),
        "scaler": scaler.to_dict(),
        "transform": transform.to_dict(),
        "params": model.to_dict(),
        "training": None,
        "training_digest": None,
    }
    if training is not None:
        X, y = training
        document["training"] = {"row_ids": list(row_ids), "X": X.tolist(), "y": y.tolist()}
        document["training_digest"] = training_digest(X, y)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(document), encoding="utf-8")
    return path


def load_model(path) -> StoredModel:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"{path}: cannot read model document ({e})")
    if document.get("format") != FORMAT:
        raise ValidationError(f"{path.name}: not a {FORMAT} document")
    if document.get("version") not in SUPPORTED_VERSIONS:
        raise ValidationError(f"{path.name}: unsupported model version {document.get('version')}")

    method = document["method"]
    feature_ids = tuple(document["feature_ids"])
    scaler = ScalingParams.from_dict(document["scaler"])
    transform = transform_from_dict(document["transform"])
    params = document["params"]

    X = y = None
    digest = document.get("training_digest") or ""
    if document.get("training") is not None:
        X = np.asarray(document["training"]["X"], dtype=float)
        y = np.asarray(document["training"]["y"], dtype=float)
        if training_digest(X, y) != digest:
            raise ValidationError(f"{path.name}: training data does not match its digest")

    if method == "lr":
        model = LinearModel(params["intercept"], np.asarray(params["coefficients"], float), feature_ids)
    elif method == "lasso":
        model = LassoModel(
            params["intercept"], np.asarray(params["coefficients"], float), feature_ids,
            penalty=params["penalty"], sweeps=params.get("sweeps", 0),
        )
    elif method == "nca":
        model = NcaModel(
            weights=np.asarray(params["weights"], float),
            regularization=params["regularization"],
            kernel_width=params["kernel_width"],
            X_train=X,
            y_train=y,
            feature_ids=feature_ids,
            objective=params.get("objective", float("nan")),
            iterations=params.get("iterations", 0),
        )
    elif method == "gpr":
        model = condition_gpr(
            X, y, params["length_scales"], params["signal_std"], params["noise_std"],
            basis=params["basis_coefficient"], feature_ids=feature_ids,
        )
    else:
        raise ValidationError(f"{path.name}: unknown method '{method}'")
    return StoredModel(method, model, scaler, transform, digest)
