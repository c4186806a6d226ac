# synth_walls.py
# Seeded synthetic wall databases with a known NCDE ground truth.
# Usage: python -m tools.synth_walls --out walls.csv [--count 312] [--seed 0]
#        [--truth nonlinear-interaction] [--noise 0.1] [--informative aspect_ratio,l_w,...]

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.dataset import (
    FAILURE_MODES,
    FEATURE_BY_ID,
    FEATURE_IDS,
    SHAPES,
    DesignMatrix,
    WallSpecimen,
    design_matrix,
    write_specimens,
)
from core.errors import ValidationError
from core.logs import setup_logging

logger = logging.getLogger(__name__)

GROUND_TRUTHS = ("linear", "nonlinear-interaction", "single-feature")
# the nine features that mattered most for the real database
DEFAULT_INFORMATIVE = (
    "aspect_ratio", "l_w", "t_w", "f_c", "rho_l", "rho_bl", "axial_load_ratio", "b_0", "s_over_db",
)
BASE_NCDE = 1000.0
GROUND_TRUTH_COLUMN = "ground_truth"

_SHAPE_TERMS = (
    lambda z: z,
    lambda z: np.cos(np.pi * z),
    lambda z: z ** 2,
    lambda z: np.sin(2.0 * np.pi * z),
)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    count: int = 312
    informative: tuple[str, ...] = DEFAULT_INFORMATIVE
    ground_truth: str = "nonlinear-interaction"
    noise_std: float = 0.1  # fraction of the log ground truth's std

    def __post_init__(self):
        object.__setattr__(self, "informative", tuple(self.informative))
        unknown = [f for f in self.informative if f not in FEATURE_IDS]
        if unknown:
            raise ValidationError(f"unknown informative feature(s): {', '.join(unknown)}")
        if not self.informative:
            raise ValidationError("at least one informative feature is needed")
        if self.ground_truth not in GROUND_TRUTHS:
            raise ValidationError(f"unknown ground truth '{self.ground_truth}' (choose from {', '.join(GROUND_TRUTHS)})")
        if self.noise_std < 0:
            raise ValidationError(f"noise std must be >= 0, got {self.noise_std}")
        if self.count < 1:
            raise ValidationError(f"count must be >= 1, got {self.count}")


@dataclass(frozen=True, eq=False)
class SynthWalls:
    spec: SynthSpec
    specimens: list[WallSpecimen]
    ground_truth: np.ndarray

    def matrix(self) -> DesignMatrix:
        return design_matrix(self.specimens, FEATURE_IDS)

    def write(self, path) -> Path:
        return write_specimens(self.specimens, path)


def _ground_truth(z: np.ndarray, kind: str) -> np.ndarray:
    """Positive NCDE-like target from the informative features' [-1, 1] coordinates."""
    k = z.shape[1]
    if kind == "linear":
        return BASE_NCDE * (1.0 + 0.5 * z.sum(axis=1) / k)
    if kind == "single-feature":
        return BASE_NCDE * np.exp(2.0 * z[:, 0])
    log_g = sum(0.6 * _SHAPE_TERMS[j % len(_SHAPE_TERMS)](z[:, j]) for j in range(k))
    if k >= 2:
        log_g = log_g + 0.5 * z[:, 0] * z[:, 1]
    return BASE_NCDE * np.exp(log_g)


def gen_walls(spec: SynthSpec) -> SynthWalls:
    """Uniform features inside the database ranges; NCDE = ground truth x lognormal noise."""
    rng = np.random.default_rng(spec.seed)
    u = rng.uniform(0.0, 1.0, size=(spec.count, len(FEATURE_IDS)))
    lo = np.array([FEATURE_BY_ID[f].minimum for f in FEATURE_IDS])
    hi = np.array([FEATURE_BY_ID[f].maximum for f in FEATURE_IDS])
    values = lo + u * (hi - lo)

    columns = [FEATURE_IDS.index(f) for f in spec.informative]
    truth = _ground_truth(2.0 * u[:, columns] - 1.0, spec.ground_truth)
    noise = rng.standard_normal(spec.count)
    spread = float(np.std(np.log(truth)))
    target = truth * np.exp(spec.noise_std * spread * noise) if spec.noise_std > 0 else truth.copy()

    shapes = rng.integers(0, len(SHAPES), spec.count)
    specimens = [
        WallSpecimen(
            id=f"W{i + 1:04d}",
            section_shape=SHAPES[shapes[i]],
            failure_mode=FAILURE_MODES[i % len(FAILURE_MODES)],
            ncde=float(target[i]),
            row=i + 2,
            extra={GROUND_TRUTH_COLUMN: repr(float(truth[i]))},
            **{f: float(values[i, j]) for j, f in enumerate(FEATURE_IDS)},
        )
        for i in range(spec.count)
    ]
    return SynthWalls(spec, specimens, truth)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="synth_walls", description="write a synthetic walls CSV")
    parser.add_argument("--out", required=True)
    parser.add_argument("--count", type=int, default=312)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--truth", choices=GROUND_TRUTHS, default="nonlinear-interaction")
    parser.add_argument("--noise", type=float, default=0.1)
    parser.add_argument("--informative", default=",".join(DEFAULT_INFORMATIVE))
    args = parser.parse_args(argv)
    setup_logging()

    try:
        spec = SynthSpec(
            seed=args.seed,
            count=args.count,
            informative=tuple(f.strip() for f in args.informative.split(",") if f.strip()),
            ground_truth=args.truth,
            noise_std=args.noise,
        )
        path = gen_walls(spec).write(args.out)
    except ValidationError as e:
        logger.error(f"Error: {e}")
        return e.exit_code
    logger.info(f"wrote {spec.count} synthetic walls to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
