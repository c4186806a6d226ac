# gpr.py
# Gaussian process regression with a constant mean and an ARD squared-exponential
# kernel. Hyperparameters maximize the exact marginal likelihood (L-BFGS-B with
# analytic gradients, several seeded restarts); the constant mean is profiled out
# by generalized least squares for every hyperparameter setting.

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import cdist, pdist

from agents.weights import FeatureWeights, normalize_weights
from core.dataset import DesignMatrix
from core.errors import FactorizationError, ValidationError

logger = logging.getLogger(__name__)

JITTER = 1e-10
MAX_JITTER = 1e-4
NOISE_FLOOR = 1e-4  # times the target scale
LENGTH_BOUNDS = (1e-3, 1e3)
SIGNAL_BOUNDS = (1e-6, 1e3)  # times the target scale
NOISE_CEILING = 1e2  # times the target scale
RESTART_SPREAD = 1.0
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GprModel:
    length_scales: np.ndarray
    signal_std: float
    noise_std: float
    basis_coefficient: float
    X_train: np.ndarray
    y_train: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    negative_log_likelihood: float
    feature_ids: tuple[str, ...] = ()

    @property
    def log_length_scales(self) -> np.ndarray:
        return np.log(self.length_scales)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([np.log(self.length_scales), [np.log(self.signal_std), np.log(self.noise_std)]])

    def predict(self, X) -> np.ndarray:
        return gpr_predict(self, X)[0]

    def predict_with_std(self, X) -> tuple[np.ndarray, np.ndarray]:
        return gpr_predict(self, X)

    def feature_weights(self) -> FeatureWeights:
        return gpr_feature_weights(self)

    def to_dict(self) -> dict:
        return {
            "length_scales": [float(v) for v in self.length_scales],
            "signal_std": float(self.signal_std),
            "noise_std": float(self.noise_std),
            "basis_coefficient": float(self.basis_coefficient),
            "jitter": float(self.jitter),
            "negative_log_likelihood": float(self.negative_log_likelihood),
        }


def ard_kernel(x_i, x_j, length_scales, signal_std: float) -> float:
    """sigma_f^2 * exp(-1/2 * sum_d (x_id - x_jd)^2 / sigma_d^2)."""
    x_i = np.asarray(x_i, dtype=float).ravel()
    x_j = np.asarray(x_j, dtype=float).ravel()
    length_scales = np.asarray(length_scales, dtype=float).ravel()
    if not x_i.size == x_j.size == length_scales.size:
        raise ValidationError(
            f"dimension mismatch: {x_i.size} vs {x_j.size} inputs, {length_scales.size} length scales"
        )
    if np.any(length_scales <= 0) or signal_std <= 0:
        raise ValidationError("length scales and signal std must be > 0")
    return float(signal_std ** 2 * np.exp(-0.5 * np.sum(((x_i - x_j) / length_scales) ** 2)))


def ard_kernel_matrix(A, B, length_scales, signal_std: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    length_scales = np.asarray(length_scales, dtype=float)
    if A.shape[1] != length_scales.size or B.shape[1] != length_scales.size:
        raise ValidationError(
            f"dimension mismatch: inputs with {A.shape[1]} and {B.shape[1]} features, "
            f"{length_scales.size} length scales"
        )
    return signal_std ** 2 * np.exp(-0.5 * cdist(A / length_scales, B / length_scales, "sqeuclidean"))


def _cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K + jitter*I, raising jitter tenfold up to the ceiling."""
    scale = float(np.mean(np.diag(K)))
    jitter = JITTER * scale
    eye = np.eye(K.shape[0])
    while jitter <= MAX_JITTER * scale * (1 + 1e-9):
        try:
            return linalg.cholesky(K + jitter * eye, lower=True, check_finite=False), jitter
        except linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(
        f"kernel matrix not positive definite even with jitter {MAX_JITTER:g} x mean diagonal"
    )


def _gls_basis(L: np.ndarray, y: np.ndarray) -> float:
    ones = np.ones_like(y)
    k_inv_ones = linalg.cho_solve((L, True), ones, check_finite=False)
    return float(k_inv_ones @ y / (ones @ k_inv_ones))


def _unpack(theta, n: int) -> tuple[np.ndarray, float, float]:
    theta = np.asarray(theta, dtype=float)
    if theta.size != n + 2:
        raise ValidationError(f"expected {n + 2} hyperparameters for {n} features, got {theta.size}")
    return np.exp(theta[:n]), float(np.exp(theta[n])), float(np.exp(theta[n + 1]))


def gpr_negative_log_likelihood(theta, X, y, sq_diffs: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Negative log marginal likelihood and its gradient.

    theta = (log sigma_1..log sigma_n, log sigma_f, log sigma). The constant mean
    is set to its GLS optimum, so by the envelope argument it adds no gradient term.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = X.shape
    length_scales, signal_std, noise_std = _unpack(theta, n)

    Kf = ard_kernel_matrix(X, X, length_scales, signal_std)
    L, _ = _cholesky(Kf + noise_std ** 2 * np.eye(m))
    beta = _gls_basis(L, y)
    r = y - beta
    alpha = linalg.cho_solve((L, True), r, check_finite=False)
    value = 0.5 * r @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * m * LOG_2PI

    # 1/2 tr((K^-1 - alpha alpha^T) dK)
    Q = linalg.cho_solve((L, True), np.eye(m), check_finite=False) - np.outer(alpha, alpha)
    if sq_diffs is None:
        sq_diffs = (X[:, None, :] - X[None, :, :]) ** 2
    QK = Q * Kf
    grad = np.empty(n + 2)
    grad[:n] = 0.5 * np.einsum("ij,ijd->d", QK, sq_diffs) / length_scales ** 2
    grad[n] = np.sum(QK)
    grad[n + 1] = noise_std ** 2 * np.trace(Q)
    return float(value), grad


def condition_gpr(
    X,
    y,
    length_scales,
    signal_std: float,
    noise_std: float,
    basis: float | None = None,
    feature_ids: tuple[str, ...] = (),
) -> GprModel:
    """Factor the training covariance for fixed hyperparameters.

    `basis` None profiles the constant mean by generalized least squares.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    length_scales = np.asarray(length_scales, dtype=float).ravel()
    m = y.size
    if X.ndim != 2 or X.shape[0] != m:
        raise ValidationError(f"{X.shape[0] if X.ndim == 2 else '?'} input rows for {m} targets")
    if noise_std < 0:
        raise ValidationError(f"noise std must be >= 0, got {noise_std}")

    Kf = ard_kernel_matrix(X, X, length_scales, signal_std)
    L, jitter = _cholesky(Kf + noise_std ** 2 * np.eye(m))
    beta = _gls_basis(L, y) if basis is None else float(basis)
    r = y - beta
    alpha = linalg.cho_solve((L, True), r, check_finite=False)
    nll = 0.5 * r @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * m * LOG_2PI
    return GprModel(
        length_scales=length_scales,
        signal_std=float(signal_std),
        noise_std=float(noise_std),
        basis_coefficient=beta,
        X_train=X.copy(),
        y_train=y.copy(),
        chol=L,
        alpha=alpha,
        jitter=jitter,
        negative_log_likelihood=float(nll),
        feature_ids=tuple(feature_ids),
    )


def _initial_length_scales(X: np.ndarray) -> np.ndarray:
    scales = np.array([pdist(X[:, [d]], "cityblock").mean() for d in range(X.shape[1])])
    scales[~(scales > 0)] = 1.0
    return scales


def fit_gpr(data: DesignMatrix, restarts: int = 5, seed: int = 0) -> GprModel:
    """Maximize the marginal likelihood from `restarts` seeded starting points.

    The first start is the data-driven guess (mean pairwise distance per
    dimension, std(y), 0.1 std(y)); the rest scale it by seeded lognormal
    factors. A start whose covariance cannot be factored is skipped.
    """
    X, y = data.X, data.y
    m, n = X.shape
    if m < 5:
        raise ValidationError(f"GPR needs at least 5 training rows, got {m}")

    y_scale = float(np.std(y)) or 1.0
    theta0 = np.concatenate([np.log(_initial_length_scales(X)), [np.log(y_scale), np.log(0.1 * y_scale)]])
    bounds = (
        [(np.log(LENGTH_BOUNDS[0]), np.log(LENGTH_BOUNDS[1]))] * n
        + [(np.log(SIGNAL_BOUNDS[0] * y_scale), np.log(SIGNAL_BOUNDS[1] * y_scale))]
        + [(np.log(NOISE_FLOOR * y_scale), np.log(NOISE_CEILING * y_scale))]
    )
    lower, upper = np.array(bounds).T
    sq_diffs = (X[:, None, :] - X[None, :, :]) ** 2

    def objective(theta):
        try:
            return gpr_negative_log_likelihood(theta, X, y, sq_diffs)
        except FactorizationError:
            return np.inf, np.zeros_like(theta)

    rng = np.random.default_rng(seed)
    best = None
    for restart in range(restarts):
        start = theta0 if restart == 0 else theta0 + rng.normal(0.0, RESTART_SPREAD, theta0.size)
        start = np.clip(start, lower, upper)
        result = optimize.minimize(objective, start, jac=True, method="L-BFGS-B", bounds=bounds)
        if not np.isfinite(result.fun):
            logger.warning(f"GPR restart {restart} skipped: covariance could not be factored")
            continue
        if best is None or result.fun < best.fun:
            best = result
        logger.debug(f"GPR restart {restart}: nll {result.fun:.6g} ({result.message})")

    if best is None:
        raise FactorizationError(f"all {restarts} GPR restarts failed to factor the covariance")
    length_scales, signal_std, noise_std = _unpack(best.x, n)
    return condition_gpr(X, y, length_scales, signal_std, noise_std, feature_ids=data.feature_ids)


def gpr_predict(model: GprModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior predictive mean and std (observation noise included)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.length_scales.size:
        raise ValidationError(
            f"model expects {model.length_scales.size} features, got input of shape {X.shape}"
        )
    k_star = ard_kernel_matrix(X, model.X_train, model.length_scales, model.signal_std)
    mean = model.basis_coefficient + k_star @ model.alpha
    v = linalg.solve_triangular(model.chol, k_star.T, lower=True, check_finite=False)
    variance = model.signal_std ** 2 - np.sum(v ** 2, axis=0) + model.noise_std ** 2
    return mean, np.sqrt(np.maximum(variance, 0.0))


def normalized_weights_from_length_scales(length_scales, feature_ids=None) -> FeatureWeights:
    """exp(-sigma_d) per feature, normalized to sum to one."""
    length_scales = np.asarray(length_scales, dtype=float).ravel()
    if feature_ids is None:
        feature_ids = tuple(f"x{d}" for d in range(length_scales.size))
    return normalize_weights(np.exp(-length_scales), feature_ids, "gpr")


def gpr_feature_weights(model: GprModel) -> FeatureWeights:
    return normalized_weights_from_length_scales(model.length_scales, model.feature_ids or None)
