# weights.py
# Normalized per-feature relevance weights reported by the nonlinear regressors.

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from core.errors import ValidationError


@dataclass(frozen=True, eq=False)
class FeatureWeights:
    values: np.ndarray
    feature_ids: tuple[str, ...]
    method: str

    def as_dict(self) -> dict[str, float]:
        return {f: float(v) for f, v in zip(self.feature_ids, self.values)}


def normalize_weights(raw, feature_ids, method: str) -> FeatureWeights:
    """Scale non-negative raw relevances to sum to one; all-zero input gives uniform weights."""
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size != len(feature_ids):
        raise ValidationError(f"{raw.size} weights for {len(feature_ids)} features")
    if np.any(raw < 0) or not np.all(np.isfinite(raw)):
        raise ValidationError("raw feature weights must be finite and non-negative")
    total = raw.sum()
    values = raw / total if total > 0 else np.full(raw.size, 1.0 / raw.size)
    return FeatureWeights(values, tuple(feature_ids), method)
