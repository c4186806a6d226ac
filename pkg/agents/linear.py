# linear.py
# Ordinary least squares and LASSO regressors over scaled wall features.

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from core.dataset import DesignMatrix
from core.errors import ConvergenceError, RankDeficientError, ValidationError

logger = logging.getLogger(__name__)

LASSO_TOLERANCE = 1e-8
LASSO_MAX_SWEEPS = 100_000


@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    feature_ids: tuple[str, ...] = ()

    def predict(self, X) -> np.ndarray:
        return predict_linear(self, X)

    def to_dict(self) -> dict:
        return {
            "intercept": float(self.intercept),
            "coefficients": [float(c) for c in self.coefficients],
        }


@dataclass(frozen=True, eq=False)
class LassoModel(LinearModel):
    penalty: float = 0.0
    sweeps: int = 0
    objective_history: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "penalty": float(self.penalty), "sweeps": self.sweeps}


def _rows(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n:
        raise ValidationError(f"model expects {n} features, got input of shape {X.shape}")
    return X


def fit_ols(data: DesignMatrix) -> LinearModel:
    """Least squares with an intercept column.

    Rank is read off a column-pivoted QR so the dependent columns can be named.
    """
    m, n = data.X.shape
    if m <= n + 1:
        raise ValidationError(f"least squares needs more than {n + 1} rows for {n} features, got {m}")

    A = np.column_stack([np.ones(m), data.X])
    _, R, pivots = linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag[0] * max(A.shape) * np.finfo(float).eps
    rank = int(np.sum(diag > tol))
    if rank < n + 1:
        names = ["intercept", *data.feature_ids]
        dependent = [names[j] for j in pivots[rank:]]
        raise RankDeficientError(
            f"rank-deficient design matrix (rank {rank} of {n + 1}); dependent column(s): {', '.join(dependent)}",
            dependent,
        )

    beta, *_ = linalg.lstsq(A, data.y)
    return LinearModel(float(beta[0]), beta[1:].copy(), data.feature_ids)


def predict_linear(model: LinearModel, X) -> np.ndarray:
    X = _rows(X, model.coefficients.size)
    return model.intercept + X @ model.coefficients


def _soft_threshold(value: float, threshold: float) -> float:
    return float(np.sign(value) * max(abs(value) - threshold, 0.0))


def lasso_objective(X, y, intercept: float, coefficients, penalty: float) -> float:
    residual = y - intercept - X @ coefficients
    return float(residual @ residual + penalty * np.sum(np.abs(coefficients)))


def fit_lasso(
    data: DesignMatrix,
    penalty: float,
    tol: float = LASSO_TOLERANCE,
    max_sweeps: int = LASSO_MAX_SWEEPS,
    initial: np.ndarray | None = None,
) -> LassoModel:
    """Cyclic coordinate descent for sum of squared errors + penalty * sum |beta_j|.

    Works on centered data with the covariance (Gram) update, so the
    intercept is unpenalized and recovered afterwards. Stops when no
    coefficient moves by `tol` or more in a sweep.
    """
    if not penalty >= 0:
        raise ValidationError(f"LASSO penalty must be >= 0, got {penalty}")
    X, y = data.X, data.y
    n = X.shape[1]
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc = X - x_mean
    gram = Xc.T @ Xc
    corr = Xc.T @ (y - y_mean)
    diag = np.diag(gram)

    beta = np.zeros(n) if initial is None else np.array(initial, dtype=float)
    history = []
    delta = np.inf
    sweep = 0
    while sweep < max_sweeps:
        sweep += 1
        delta = 0.0
        for j in range(n):
            if diag[j] <= 0:
                new = 0.0
            else:
                rho = corr[j] - gram[j] @ beta + diag[j] * beta[j]
                new = _soft_threshold(rho, penalty / 2.0) / diag[j]
            delta = max(delta, abs(new - beta[j]))
            beta[j] = new
        history.append(lasso_objective(Xc, y - y_mean, 0.0, beta, penalty))
        if delta < tol:
            break
    else:
        raise ConvergenceError(
            f"LASSO did not converge after {max_sweeps} sweeps (final max change {delta:.3e})",
            {"sweeps": sweep, "final_delta": float(delta), "objective": history[-1]},
        )

    intercept = float(y_mean - x_mean @ beta)
    return LassoModel(intercept, beta, data.feature_ids, float(penalty), sweep, tuple(history))


def lasso_penalty_bound(data: DesignMatrix) -> float:
    """Smallest penalty at which every slope is exactly zero."""
    return float(2.0 * np.max(np.abs((data.X - data.X.mean(axis=0)).T @ (data.y - data.y.mean()))))


def select_lasso_penalty(data: DesignMatrix, folds: int = 5, seed: int = 0, grid_size: int = 30) -> float:
    """K-fold cross-validated penalty on a log grid below the all-zero bound (plus 0).

    Ties go to the larger penalty.
    """
    m = data.m
    folds = min(folds, m)
    if folds < 2:
        raise ValidationError(f"cross-validation needs at least 2 folds, got {folds}")
    bound = lasso_penalty_bound(data)
    if bound == 0:
        return 0.0
    grid = np.append(np.geomspace(bound, bound * 1e-4, grid_size), 0.0)
    assignment = np.random.default_rng(seed).permutation(m) % folds

    errors = np.full(grid.size, np.inf)
    warm: dict[int, np.ndarray] = {}
    for k, penalty in enumerate(grid):
        total = 0.0
        try:
            for fold in range(folds):
                held = assignment == fold
                # descending grid: previous solution starts the next fit
                model = fit_lasso(data.take(np.flatnonzero(~held)), penalty, initial=warm.get(fold))
                warm[fold] = model.coefficients
                residual = data.y[held] - predict_linear(model, data.X[held])
                total += float(residual @ residual)
        except (ConvergenceError, ValidationError) as e:
            logger.warning(f"penalty {penalty:.4g} skipped in cross-validation: {e}")
            continue
        errors[k] = total / m

    if not np.any(np.isfinite(errors)):
        raise ConvergenceError("no LASSO penalty could be cross-validated")
    best = float(grid[int(np.argmin(errors))])
    logger.debug(f"cross-validated LASSO penalty {best:.4g} (bound {bound:.4g})")
    return best
