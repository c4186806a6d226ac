# transform.py
# Target transforms (Box-Cox, log) and normal probability plot data.

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import optimize, special, stats

from core.errors import ValidationError

logger = logging.getLogger(__name__)

LAMBDA_BOUNDS = (-5.0, 5.0)
LAMBDA_GRID_STEP = 0.01


def _positive(y, what: str = "value") -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    bad = np.flatnonzero(~(arr.ravel() > 0))
    if bad.size:
        raise ValidationError(f"{what} at index {int(bad[0])} must be > 0, got {arr.ravel()[bad[0]]}")
    return arr


@dataclass(frozen=True)
class BoxCoxParams:
    lam: float

    def __post_init__(self):
        if not np.isfinite(self.lam) or not LAMBDA_BOUNDS[0] <= self.lam <= LAMBDA_BOUNDS[1]:
            raise ValidationError(f"Box-Cox lambda must lie in [-5, 5], got {self.lam}")


def boxcox_apply(y, lam: float):
    """(y^λ - 1)/λ, or log y at λ = 0."""
    return special.boxcox(_positive(y), lam)


def boxcox_invert(z, lam: float):
    y = special.inv_boxcox(np.asarray(z, dtype=float), lam)
    if not np.all(np.isfinite(y)):
        raise ValidationError(f"value outside the invertible range of Box-Cox with lambda={lam:g}")
    return y


def boxcox_optimize(y) -> BoxCoxParams:
    """Maximize the Box-Cox profile log-likelihood over λ in [-5, 5].

    A 0.01 grid locates the peak, then a bounded scalar search refines it
    between the neighbouring grid points.
    """
    y = _positive(y, "sample").ravel()
    if y.size < 10:
        raise ValidationError(f"Box-Cox fit needs at least 10 values, got {y.size}")
    if np.ptp(y) == 0:
        raise ValidationError("Box-Cox fit needs a non-constant sample")

    steps = int(round((LAMBDA_BOUNDS[1] - LAMBDA_BOUNDS[0]) / LAMBDA_GRID_STEP))
    grid = np.linspace(LAMBDA_BOUNDS[0], LAMBDA_BOUNDS[1], steps + 1)
    llf = np.array([stats.boxcox_llf(lam, y) for lam in grid])
    llf[~np.isfinite(llf)] = -np.inf
    k = int(np.argmax(llf))

    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    result = optimize.minimize_scalar(
        lambda lam: -stats.boxcox_llf(lam, y), bounds=(lo, hi), method="bounded", options={"xatol": 1e-4}
    )
    lam = float(result.x) if result.success and -result.fun >= llf[k] else float(grid[k])
    return BoxCoxParams(float(np.clip(lam, *LAMBDA_BOUNDS)))


def log_apply(y):
    return np.log(_positive(y))


def log_invert(z):
    return np.exp(np.asarray(z, dtype=float))


def filliben_medians(m: int) -> np.ndarray:
    """Approximate medians of the uniform order statistics for a sample of size m."""
    if m < 2:
        raise ValidationError(f"need at least 2 order statistics, got {m}")
    i = np.arange(1, m + 1, dtype=float)
    medians = (i - 0.3175) / (m + 0.365)
    medians[-1] = 0.5 ** (1.0 / m)
    medians[0] = 1.0 - medians[-1]
    return medians


@dataclass(frozen=True, eq=False)
class ProbabilityPlotData:
    sorted_values: np.ndarray
    theoretical_quantiles: np.ndarray

    @property
    def correlation(self) -> float:
        """Pearson correlation of the pairs; NaN for a constant sample."""
        if np.ptp(self.sorted_values) == 0:
            return float("nan")
        return float(np.corrcoef(self.theoretical_quantiles, self.sorted_values)[0, 1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"theoretical_quantile": self.theoretical_quantiles, "sample_value": self.sorted_values}
        )


def probability_plot(y) -> ProbabilityPlotData:
    values = np.sort(np.asarray(y, dtype=float).ravel())
    if values.size < 2:
        raise ValidationError(f"probability plot needs at least 2 values, got {values.size}")
    return ProbabilityPlotData(values, stats.norm.ppf(filliben_medians(values.size)))


class OutputTransform:
    """Target transform fitted on training targets and inverted on predictions."""

    name = "none"

    def fit(self, y) -> "OutputTransform":
        return self

    def forward(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float)

    def inverse(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float)

    @property
    def tag(self) -> str:
        return self.name

    def to_dict(self) -> dict:
        return {"name": self.name}


class IdentityTransform(OutputTransform):
    name = "none"


class LogTransform(OutputTransform):
    name = "log"

    def forward(self, y) -> np.ndarray:
        return log_apply(y)

    def inverse(self, z) -> np.ndarray:
        return log_invert(z)


class BoxCoxTransform(OutputTransform):
    name = "boxcox"

    def __init__(self, lam: float | None = None):
        self.params = BoxCoxParams(lam) if lam is not None else None

    def fit(self, y) -> "BoxCoxTransform":
        self.params = boxcox_optimize(y)
        logger.debug(f"Box-Cox lambda = {self.params.lam:.4f}")
        return self

    def _lam(self) -> float:
        if self.params is None:
            raise ValidationError("Box-Cox transform used before fitting")
        return self.params.lam

    def forward(self, y) -> np.ndarray:
        return boxcox_apply(y, self._lam())

    def inverse(self, z) -> np.ndarray:
        return boxcox_invert(z, self._lam())

    @property
    def tag(self) -> str:
        return f"boxcox({self._lam():.4f})" if self.params else "boxcox"

    def to_dict(self) -> dict:
        return {"name": self.name, "lambda": None if self.params is None else self.params.lam}


_TRANSFORMS = {cls.name: cls for cls in (IdentityTransform, LogTransform, BoxCoxTransform)}


def make_transform(name: str) -> OutputTransform:
    try:
        return _TRANSFORMS[name]()
    except KeyError:
        raise ValidationError(f"unknown transform '{name}' (choose from {', '.join(_TRANSFORMS)})")


def transform_from_dict(data: dict) -> OutputTransform:
    if data.get("name") == BoxCoxTransform.name:
        return BoxCoxTransform(data.get("lambda"))
    return make_transform(data.get("name", "none"))
