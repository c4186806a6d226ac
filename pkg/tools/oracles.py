# oracles.py
# Brute-force reference computations that the fast paths are checked against.

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from agents.gpr import gpr_negative_log_likelihood
from core.dataset import DesignMatrix
from core.errors import FactorizationError, ValidationError

logger = logging.getLogger(__name__)

MAX_GRID_CELLS = 200_000


def oracle_shoelace(points) -> float:
    """Area of a closed polygon given as (x, y) vertices, any orientation."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValidationError("shoelace needs at least 3 (x, y) vertices")
    x, y = pts[:, 0], pts[:, 1]
    return float(abs(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))


@dataclass(frozen=True)
class GridOptimum:
    negative_log_likelihood: float
    length_scales: np.ndarray
    cells: int
    skipped: int


def oracle_grid_gpr(
    data: DesignMatrix,
    grid: Sequence[float] | Sequence[Sequence[float]],
    signal_std: float,
    noise_std: float,
) -> GridOptimum:
    """Exhaustive search of length scales for fixed signal and noise std.

    `grid` is either one list of length-scale values used for every feature or
    one list per feature. Cells whose covariance cannot be factored are skipped.
    """
    n = data.n
    axes = [list(grid)] * n if np.ndim(grid[0]) == 0 else [list(g) for g in grid]
    if len(axes) != n:
        raise ValidationError(f"{len(axes)} grid axes for {n} features")
    cells = int(np.prod([len(a) for a in axes]))
    if cells > MAX_GRID_CELLS:
        raise ValidationError(f"grid of {cells} cells is too large (limit {MAX_GRID_CELLS})")

    tail = [np.log(signal_std), np.log(noise_std)]
    sq_diffs = (data.X[:, None, :] - data.X[None, :, :]) ** 2
    best_value, best_scales, skipped = np.inf, None, 0
    for scales in itertools.product(*axes):
        theta = np.concatenate([np.log(scales), tail])
        try:
            value, _ = gpr_negative_log_likelihood(theta, data.X, data.y, sq_diffs)
        except FactorizationError:
            skipped += 1
            continue
        if value < best_value:
            best_value, best_scales = value, np.asarray(scales, dtype=float)

    if best_scales is None:
        raise FactorizationError("no grid cell produced a factorable covariance")
    logger.debug(f"grid oracle: best nll {best_value:.6g} over {cells} cells ({skipped} skipped)")
    return GridOptimum(float(best_value), best_scales, cells, skipped)
