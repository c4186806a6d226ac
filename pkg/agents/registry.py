# registry.py
# Method table: one fit entry point per regressor, so the pipeline can treat them alike.

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from agents.gpr import fit_gpr
from agents.linear import fit_lasso, fit_ols, select_lasso_penalty
from agents.nca import fit_nca
from core.dataset import DesignMatrix
from core.errors import ValidationError
from core.settings import ModelSettings


@dataclass(frozen=True)
class MethodSpec:
    name: str
    label: str
    fit: Callable[[DesignMatrix, ModelSettings, int], object]
    has_weights: bool


def _fit_lr(data: DesignMatrix, settings: ModelSettings, seed: int):
    return fit_ols(data)


def _fit_lasso(data: DesignMatrix, settings: ModelSettings, seed: int):
    penalty = settings.lasso_penalty
    if penalty is None:
        penalty = select_lasso_penalty(data, folds=settings.lasso_folds, seed=seed)
    return fit_lasso(data, penalty)


def _fit_nca(data: DesignMatrix, settings: ModelSettings, seed: int):
    return fit_nca(
        data,
        regularization=settings.nca_regularization,
        kernel_width=settings.nca_kernel_width,
        starts=settings.nca_starts,
        seed=seed,
    )


def _fit_gpr(data: DesignMatrix, settings: ModelSettings, seed: int):
    return fit_gpr(data, restarts=settings.gpr_restarts, seed=seed)


REGISTRY: dict[str, MethodSpec] = {
    spec.name: spec
    for spec in (
        MethodSpec("lr", "linear regression", _fit_lr, has_weights=False),
        MethodSpec("lasso", "LASSO", _fit_lasso, has_weights=False),
        MethodSpec("nca", "NCA regression", _fit_nca, has_weights=True),
        MethodSpec("gpr", "Gaussian process regression", _fit_gpr, has_weights=True),
    )
}


def get_method(name: str) -> MethodSpec:
    try:
        return REGISTRY[name.lower()]
    except KeyError:
        raise ValidationError(f"unknown method '{name}' (choose from {', '.join(REGISTRY)})")


def fit_model(name: str, data: DesignMatrix, settings: ModelSettings | None = None, seed: int = 0):
    return get_method(name).fit(data, settings or ModelSettings(), seed)
