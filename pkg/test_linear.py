# test_linear.py

import itertools

import numpy as np
import pytest

from agents.linear import (
    fit_lasso,
    fit_ols,
    lasso_objective,
    lasso_penalty_bound,
    predict_linear,
    select_lasso_penalty,
)
from core.dataset import DesignMatrix
from core.errors import ConvergenceError, RankDeficientError, ValidationError


def matrix(X, y, feature_ids=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    ids = feature_ids or tuple(f"x{j}" for j in range(X.shape[1]))
    return DesignMatrix(X, y, ids, tuple(f"r{i}" for i in range(len(X))))


def sparse_problem(seed: int = 0, m: int = 200, noise: float = 0.1):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (m, 8))
    beta = np.array([3.0, -2.0, 1.5, 0, 0, 0, 0, 0])
    y = 4.0 + X @ beta + noise * rng.standard_normal(m)
    return matrix(X, y), beta


# --- OLS -----------------------------------------------------------------------

def test_exact_line():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    model = fit_ols(matrix(x, 2 + 3 * x))
    assert model.intercept == pytest.approx(2.0)
    assert model.coefficients == pytest.approx([3.0])


def test_duplicate_column_is_named():
    x = np.linspace(-1, 1, 10)
    data = matrix(np.column_stack([x, np.cos(x), x]), x ** 2, ("l_w", "t_w", "f_c"))
    with pytest.raises(RankDeficientError, match="rank-deficient") as info:
        fit_ols(data)
    assert len(info.value.dependent_columns) == 1
    assert info.value.dependent_columns[0] in ("l_w", "f_c")


def test_ols_needs_more_rows_than_parameters():
    with pytest.raises(ValidationError, match="more than 3 rows"):
        fit_ols(matrix(np.eye(3)[:, :2], [1.0, 2.0, 3.0]))


def test_noisy_coefficients_are_recovered(rng):
    X = rng.uniform(-1, 1, (500, 2))
    y = 1.0 + 2.0 * X[:, 0] - 3.0 * X[:, 1] + 0.1 * rng.standard_normal(500)
    model = fit_ols(matrix(X, y))
    assert model.intercept == pytest.approx(1.0, abs=0.05)
    assert model.coefficients == pytest.approx([2.0, -3.0], abs=0.05)


def test_residuals_are_orthogonal_to_design(rng):
    for _ in range(20):
        m, n = int(rng.integers(8, 40)), int(rng.integers(1, 5))
        X, y = rng.normal(size=(m, n)), rng.normal(size=m) * 100
        model = fit_ols(matrix(X, y))
        A = np.column_stack([np.ones(m), X])
        residual = y - predict_linear(model, X)
        assert np.max(np.abs(A.T @ residual)) < 1e-8 * np.linalg.norm(y)


def test_predict_linear():
    model = fit_ols(matrix([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [1.0, 3.0, 0.0, 2.0]))
    assert predict_linear(model, [0.5, 0.5]) == pytest.approx([1.5])
    assert model.predict([[0.0, 0.0], [2.0, 0.0]]) == pytest.approx([1.0, 5.0])
    with pytest.raises(ValidationError, match="expects 2 features"):
        predict_linear(model, [[1.0, 2.0, 3.0]])


# --- LASSO ---------------------------------------------------------------------

def test_zero_penalty_matches_least_squares():
    data, _ = sparse_problem(seed=1)
    ols, lasso = fit_ols(data), fit_lasso(data, 0.0)
    assert lasso.coefficients == pytest.approx(ols.coefficients, abs=1e-4)
    assert lasso.intercept == pytest.approx(ols.intercept, abs=1e-4)


def test_penalty_at_bound_zeros_every_slope():
    data, _ = sparse_problem(seed=2)
    bound = lasso_penalty_bound(data)
    model = fit_lasso(data, bound)
    assert np.all(model.coefficients == 0.0)
    assert model.intercept == pytest.approx(data.y.mean())
    assert np.any(fit_lasso(data, 0.9 * bound).coefficients != 0.0)


def test_lasso_objective_never_increases():
    data, _ = sparse_problem(seed=3, noise=1.0)
    model = fit_lasso(data, 5.0)
    history = np.array(model.objective_history)
    assert np.all(np.diff(history) <= 1e-9 * history[:-1])
    assert history[-1] == pytest.approx(
        lasso_objective(data.X, data.y, model.intercept, model.coefficients, 5.0), rel=1e-9
    )


def test_lasso_drops_null_features():
    data, beta = sparse_problem(seed=4)
    model = fit_lasso(data, 20.0)
    assert np.all(model.coefficients[3:] == 0.0)
    assert np.all(model.coefficients[:3] != 0.0)
    assert np.sign(model.coefficients[:3]) == pytest.approx(np.sign(beta[:3]))

    # support agrees with the best least-squares subset of the same size
    best = min(
        itertools.combinations(range(8), 3),
        key=lambda cols: np.sum((data.y - fit_ols(data.subset([f"x{c}" for c in cols])).predict(data.X[:, cols])) ** 2),
    )
    assert best == (0, 1, 2)


def test_lasso_reports_non_convergence():
    data, _ = sparse_problem(seed=5)
    with pytest.raises(ConvergenceError, match="1 sweeps") as info:
        fit_lasso(data, 1.0, max_sweeps=1)
    assert info.value.trace["sweeps"] == 1


def test_lasso_rejects_negative_penalty():
    data, _ = sparse_problem()
    with pytest.raises(ValidationError):
        fit_lasso(data, -1.0)


def test_cross_validated_penalty_is_in_range():
    data, _ = sparse_problem(seed=6, m=80)
    penalty = select_lasso_penalty(data, folds=5, seed=0)
    assert 0.0 <= penalty <= lasso_penalty_bound(data)
    assert select_lasso_penalty(data, folds=5, seed=0) == penalty
