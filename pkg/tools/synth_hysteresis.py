# synth_hysteresis.py
# Seeded load-displacement traces of known geometry, with a ledger of the
# exact enclosed area of every loop. Used to check the energy path end to end.
# Usage: python -m tools.synth_hysteresis --shape ellipse --out curves/ [--cycles 3] [--seed 0]

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.errors import ValidationError
from core.hysteresis import LoadDisplacementHistory
from core.logs import setup_logging
from messaging.report_writer import dumps

logger = logging.getLogger(__name__)

LOOP_SHAPES = ("rectangle", "ellipse", "bilinear", "pinched")
YIELD_FRACTION = 0.2   # bilinear: elastic displacement per unit amplitude
PINCH_WIDTH = 0.3      # pinched: half-width of the notch per unit amplitude
PINCH_FORCE = 0.25     # pinched: force inside the notch per unit force


def loop_vertices(shape: str, amplitude: float, force: float) -> np.ndarray:
    """Clockwise polygon starting at displacement 0 on the upper branch, not closed."""
    a, b = amplitude, force
    if shape == "rectangle":
        pts = [(0, b), (a, b), (a, -b), (-a, -b), (-a, b)]
    elif shape == "bilinear":
        dy = YIELD_FRACTION * a
        pts = [(0, b), (a, b), (a - 2 * dy, -b), (-a, -b), (-a + 2 * dy, b)]
    elif shape == "pinched":
        c, d = PINCH_WIDTH * a, PINCH_FORCE * b
        pts = [
            (0, d), (c, d), (c, b), (a, b), (a, -b), (c, -b), (c, -d),
            (-c, -d), (-c, -b), (-a, -b), (-a, b), (-c, b), (-c, d),
        ]
    else:
        raise ValidationError(f"'{shape}' is not a polygonal loop")
    return np.asarray(pts, dtype=float)


def loop_area(shape: str, amplitude: float, force: float) -> float:
    """Exact enclosed area, kN*mm."""
    a, b = amplitude, force
    if shape == "rectangle":
        return 4.0 * a * b
    if shape == "ellipse":
        return float(np.pi * a * b)
    if shape == "bilinear":
        return 4.0 * b * (a - YIELD_FRACTION * a)
    if shape == "pinched":
        return 4.0 * a * b - 4.0 * (PINCH_WIDTH * a) * (b - PINCH_FORCE * b)
    raise ValidationError(f"unknown loop shape '{shape}' (choose from {', '.join(LOOP_SHAPES)})")


def sample_loop(shape: str, amplitude: float, force: float, samples: int) -> np.ndarray:
    """One loop as (displacement, force) rows, without the closing point."""
    if shape == "ellipse":
        # multiple of 4 so both displacement peaks are sampled exactly
        n = max(4, samples - samples % 4)
        t = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([amplitude * np.sin(t), force * np.cos(t)])

    vertices = loop_vertices(shape, amplitude, force)
    edges = np.roll(vertices, -1, axis=0) - vertices
    # arc length in units of the loop's own amplitude and force
    lengths = np.hypot(edges[:, 0] / amplitude, edges[:, 1] / force)
    counts = np.maximum(1, np.round(samples * lengths / lengths.sum()).astype(int))
    rows = [
        vertices[i] + np.outer(np.arange(counts[i]) / counts[i], edges[i])
        for i in range(len(vertices))
    ]
    return np.vstack(rows)


@dataclass(frozen=True)
class LoopRecord:
    index: int
    amplitude: float
    force: float
    energy: float

    def to_dict(self) -> dict:
        return {"index": self.index, "amplitude_mm": self.amplitude, "force_kN": self.force, "energy_kNmm": self.energy}


@dataclass(frozen=True, eq=False)
class SynthHysteresis:
    shape: str
    history: LoadDisplacementHistory
    loops: tuple[LoopRecord, ...] = field(default_factory=tuple)

    @property
    def total_energy(self) -> float:
        return sum(loop.energy for loop in self.loops)

    @property
    def total_drift(self) -> float:
        return sum(2.0 * loop.amplitude / self.history.wall_height * 100.0 for loop in self.loops)

    @property
    def expected_ncde(self) -> float:
        return self.total_energy / self.total_drift

    def ledger(self) -> dict:
        return {
            "shape": self.shape,
            "specimen_id": self.history.specimen_id,
            "wall_height_mm": self.history.wall_height,
            "cycles": [loop.to_dict() for loop in self.loops],
            "total_energy_kNmm": self.total_energy,
            "total_drift_pct": self.total_drift,
            "ncde": self.expected_ncde,
        }

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = self.history.specimen_id
        curve = out_dir / f"{name}.csv"
        self.history.to_frame().to_csv(curve, index=False, lineterminator="\n", float_format="%.17g")
        ledger = out_dir / f"{name}.ledger.json"
        ledger.write_text(dumps(self.ledger()), encoding="utf-8")
        return curve, ledger


def gen_hysteresis(
    shape: str,
    cycles: int = 3,
    seed: int = 0,
    amplitude: float = 10.0,
    force: float = 50.0,
    growth: float = 0.25,
    jitter: float = 0.05,
    samples_per_cycle: int = 360,
    wall_height: float = 2000.0,
    specimen_id: str | None = None,
) -> SynthHysteresis:
    """`cycles` loops of one shape with growing amplitude and constant force.

    Cycle k has amplitude `amplitude * (1 + growth * k)`, perturbed by a seeded
    uniform factor of +/- `jitter`. Loops join at displacement 0 on the upper
    branch, where every shape has the same force, so the trace is continuous.
    """
    if shape not in LOOP_SHAPES:
        raise ValidationError(f"unknown loop shape '{shape}' (choose from {', '.join(LOOP_SHAPES)})")
    if cycles < 1:
        raise ValidationError(f"cycles must be >= 1, got {cycles}")
    if amplitude <= 0 or force <= 0:
        raise ValidationError(f"amplitude and force must be > 0, got {amplitude} mm and {force} kN")
    if not 0 <= jitter < 1:
        raise ValidationError(f"jitter must lie in [0, 1), got {jitter}")

    rng = np.random.default_rng(seed)
    factors = rng.uniform(1.0 - jitter, 1.0 + jitter, cycles) if jitter > 0 else np.ones(cycles)
    records, parts = [], []
    for k in range(cycles):
        a = amplitude * (1.0 + growth * k) * float(factors[k])
        parts.append(sample_loop(shape, a, force, samples_per_cycle))
        records.append(LoopRecord(k, a, force, loop_area(shape, a, force)))
    parts.append(parts[0][:1])  # close the last loop

    points = np.vstack(parts)
    history = LoadDisplacementHistory.from_points(points, wall_height, specimen_id or f"synth_{shape}_{seed}")
    return SynthHysteresis(shape, history, tuple(records))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="synth_hysteresis", description="write a synthetic curve and its ledger")
    parser.add_argument("--shape", choices=LOOP_SHAPES, required=True)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--cycles", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--amplitude", type=float, default=10.0)
    parser.add_argument("--force", type=float, default=50.0)
    parser.add_argument("--height", type=float, default=2000.0)
    args = parser.parse_args(argv)
    setup_logging()

    try:
        synth = gen_hysteresis(
            args.shape, args.cycles, args.seed, args.amplitude, args.force, wall_height=args.height
        )
    except ValidationError as e:
        logger.error(f"Error: {e}")
        return e.exit_code
    curve, ledger = synth.write(args.out)
    logger.info(f"wrote {curve} and {ledger} (expected NCDE {synth.expected_ncde:.6g})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
