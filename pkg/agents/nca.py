# nca.py
# Neighbourhood component analysis regression: a feature-weighted, leave-one-out
# kernel smoother whose weights are learned by minimizing the LOO absolute error.

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from agents.weights import FeatureWeights, normalize_weights
from core.dataset import DesignMatrix
from core.errors import ConvergenceError, ValidationError

logger = logging.getLogger(__name__)

MAX_ITER = 500
INITIAL_STEP = 0.1
STEP_GROW = 1.01
STEP_SHRINK = 0.4
RELATIVE_TOL = 1e-9
PERTURBATION = 0.5


@dataclass(frozen=True, eq=False)
class NcaModel:
    weights: np.ndarray  # raw w; distances use w**2
    regularization: float
    kernel_width: float
    X_train: np.ndarray
    y_train: np.ndarray
    feature_ids: tuple[str, ...] = ()
    objective: float = float("nan")
    iterations: int = 0

    def predict(self, X) -> np.ndarray:
        return nca_predict(self, X)

    def feature_weights(self) -> FeatureWeights:
        return nca_feature_weights(self)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "regularization": float(self.regularization),
            "kernel_width": float(self.kernel_width),
            "objective": float(self.objective),
            "iterations": self.iterations,
        }


def abs_differences(X) -> np.ndarray:
    """|x_i - x_j| per feature, shape (m, m, n)."""
    X = np.asarray(X, dtype=float)
    return np.abs(X[:, None, :] - X[None, :, :])


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def nca_probabilities(diffs: np.ndarray, weights, kernel_width: float = 1.0) -> np.ndarray:
    """Reference-point probabilities p_ij with a zero diagonal and unit row sums."""
    distances = diffs @ (np.asarray(weights, dtype=float) ** 2)
    logits = -distances / kernel_width
    np.fill_diagonal(logits, -np.inf)
    return _softmax_rows(logits)


def nca_objective(weights, diffs: np.ndarray, y, regularization: float, kernel_width: float = 1.0):
    """Mean LOO absolute error plus regularization * sum(w^2), with its gradient in w."""
    w = np.asarray(weights, dtype=float)
    y = np.asarray(y, dtype=float)
    m = y.size
    p = nca_probabilities(diffs, w, kernel_width)
    errors = np.abs(y[:, None] - y[None, :])
    loo = np.sum(p * errors, axis=1)
    value = loo.mean() + regularization * np.sum(w ** 2)

    # d p_ij / d w_l = -(2 w_l / sigma) p_ij (A_ijl - sum_k p_ik A_ikl)
    terms = p * (errors - loo[:, None])
    spread = np.einsum("ij,ijl->l", terms, diffs)
    grad = 2.0 * w * (-spread / (m * kernel_width) + regularization)
    return float(value), grad


def _descend(w0, diffs, y, regularization, kernel_width, max_iter) -> tuple[np.ndarray, float, int, list[float]]:
    """Gradient descent keeping only steps that lower the objective; the step adapts."""
    w = np.array(w0, dtype=float)
    value, grad = nca_objective(w, diffs, y, regularization, kernel_width)
    trace = [value]
    step = INITIAL_STEP
    iterations = 0
    for iterations in range(1, max_iter + 1):
        candidate = w - step * grad
        new_value, new_grad = nca_objective(candidate, diffs, y, regularization, kernel_width)
        if not np.isfinite(new_value) or not np.all(np.isfinite(new_grad)):
            raise ConvergenceError(
                f"NCA objective diverged at iteration {iterations} (step {step:.3e}, "
                f"last finite objective {trace[-1]:.6g}, {len(trace)} accepted steps)",
                {"iteration": iterations, "step": step, "objective_trace": trace[-10:]},
            )
        if new_value < value:
            improvement = value - new_value
            w, value, grad = candidate, new_value, new_grad
            trace.append(value)
            step *= STEP_GROW
            if improvement <= RELATIVE_TOL * max(abs(value), 1e-12):
                break
        else:
            step *= STEP_SHRINK
            if step < 1e-14:
                break
    return w, value, iterations, trace


def fit_nca(
    data: DesignMatrix,
    regularization: float | None = None,
    kernel_width: float = 1.0,
    starts: int = 3,
    seed: int = 0,
    max_iter: int = MAX_ITER,
) -> NcaModel:
    """Fit NCA feature weights from several starts and keep the lowest objective.

    The first start is w = 1; later starts perturb it by seeded lognormal factors.
    `regularization` defaults to 1/m.
    """
    m, n = data.X.shape
    if m < 3:
        raise ValidationError(f"NCA needs at least 3 training rows, got {m}")
    if regularization is None:
        regularization = 1.0 / m
    if regularization < 0:
        raise ValidationError(f"NCA regularization must be >= 0, got {regularization}")
    if kernel_width <= 0:
        raise ValidationError(f"NCA kernel width must be > 0, got {kernel_width}")

    diffs = abs_differences(data.X)
    rng = np.random.default_rng(seed)
    best = None
    for start in range(starts):
        w0 = np.ones(n) if start == 0 else np.exp(rng.normal(0.0, PERTURBATION, n))
        w, value, iterations, _ = _descend(w0, diffs, data.y, regularization, kernel_width, max_iter)
        logger.debug(f"NCA start {start}: objective {value:.6g} after {iterations} iterations")
        if best is None or value < best[1]:
            best = (w, value, iterations)

    w, value, iterations = best
    return NcaModel(
        weights=w,
        regularization=float(regularization),
        kernel_width=float(kernel_width),
        X_train=data.X.copy(),
        y_train=data.y.copy(),
        feature_ids=data.feature_ids,
        objective=value,
        iterations=iterations,
    )


def nca_predict(model: NcaModel, X) -> np.ndarray:
    """Probability-weighted average of training targets around each query row."""
    if model.y_train.size == 0:
        raise ValidationError("NCA model has an empty training set")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.weights.size:
        raise ValidationError(f"model expects {model.weights.size} features, got input of shape {X.shape}")
    diffs = np.abs(X[:, None, :] - model.X_train[None, :, :])
    p = _softmax_rows(-(diffs @ model.weights ** 2) / model.kernel_width)
    return p @ model.y_train


def nca_feature_weights(model: NcaModel) -> FeatureWeights:
    return normalize_weights(np.abs(model.weights), model.feature_ids, "nca")
