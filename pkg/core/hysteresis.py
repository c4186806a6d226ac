# hysteresis.py
# Splits cyclic load-displacement traces into cycles and turns them into
# dissipated energy, NDE and NCDE figures.
#
# Units: displacement mm, force kN, energy kN*mm, drift ratio in percent.

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from core.errors import DegenerateCycleError, NoCompleteCycleError, ValidationError

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("displacement_mm", "force_kN")
DEFAULT_NOISE_FRACTION = 0.01
ZERO_NCDE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class LoadDisplacementHistory:
    displacement: np.ndarray
    force: np.ndarray
    wall_height: float
    specimen_id: str = ""

    def __post_init__(self):
        disp = np.array(self.displacement, dtype=float).ravel()
        force = np.array(self.force, dtype=float).ravel()
        label = self.specimen_id or "<history>"

        if disp.shape != force.shape:
            raise ValidationError(
                f"{label}: {disp.size} displacement samples but {force.size} force samples"
            )
        if disp.size < 4:
            raise ValidationError(f"{label}: need at least 4 points, got {disp.size}")
        bad = np.flatnonzero(~(np.isfinite(disp) & np.isfinite(force)))
        if bad.size:
            raise ValidationError(f"{label}: non-finite sample at index {int(bad[0])}")
        height = float(self.wall_height)
        if not np.isfinite(height) or height <= 0:
            raise ValidationError(f"{label}: wall height must be > 0 mm, got {self.wall_height}")

        disp.setflags(write=False)
        force.setflags(write=False)
        object.__setattr__(self, "displacement", disp)
        object.__setattr__(self, "force", force)
        object.__setattr__(self, "wall_height", height)

    @classmethod
    def from_points(cls, points, wall_height: float, specimen_id: str = "") -> "LoadDisplacementHistory":
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValidationError(f"{specimen_id or '<history>'}: points must be (displacement, force) pairs")
        return cls(arr[:, 0], arr[:, 1], wall_height, specimen_id)

    @classmethod
    def from_csv(cls, path, wall_height: float, specimen_id: str | None = None) -> "LoadDisplacementHistory":
        """Read a `displacement_mm,force_kN` curve file. The id defaults to the file stem."""
        path = Path(path)
        frame = pd.read_csv(path)
        missing = [c for c in CURVE_COLUMNS if c not in frame.columns]
        if missing:
            raise ValidationError(f"{path.name}: missing column(s) {', '.join(missing)}")

        values = frame[list(CURVE_COLUMNS)].apply(pd.to_numeric, errors="coerce")
        bad_rows, bad_cols = np.nonzero(values.isna().to_numpy())
        if bad_rows.size:
            # +2: header is line 1
            raise ValidationError(
                f"{path.name}: row {int(bad_rows[0]) + 2}: non-numeric {CURVE_COLUMNS[bad_cols[0]]}"
            )
        return cls(
            values[CURVE_COLUMNS[0]].to_numpy(),
            values[CURVE_COLUMNS[1]].to_numpy(),
            wall_height,
            specimen_id if specimen_id is not None else path.stem,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({CURVE_COLUMNS[0]: self.displacement, CURVE_COLUMNS[1]: self.force})

    def scaled(self, force: float = 1.0, displacement: float = 1.0) -> "LoadDisplacementHistory":
        """Same trace with forces and displacements (and wall height) multiplied."""
        return LoadDisplacementHistory(
            self.displacement * displacement,
            self.force * force,
            self.wall_height * displacement,
            self.specimen_id,
        )

    def __len__(self) -> int:
        return int(self.displacement.size)


@dataclass(frozen=True)
class Cycle:
    start_index: int
    end_index: int
    peak_pos_index: int
    peak_neg_index: int
    peak_pos_disp: float
    peak_neg_disp: float
    peak_pos_force: float
    peak_neg_force: float
    partial: bool = False

    def __post_init__(self):
        if self.start_index >= self.end_index:
            raise ValidationError(f"cycle start {self.start_index} must precede end {self.end_index}")
        for peak in (self.peak_pos_index, self.peak_neg_index):
            if not self.start_index <= peak <= self.end_index:
                raise ValidationError(f"peak index {peak} outside cycle [{self.start_index}, {self.end_index}]")

    @classmethod
    def over(cls, history: LoadDisplacementHistory, start: int, end: int, partial: bool = False) -> "Cycle":
        if not 0 <= start < end < len(history):
            raise ValidationError(f"cycle [{start}, {end}] outside history of {len(history)} points")
        window = history.displacement[start:end + 1]
        pos = start + int(np.argmax(window))
        neg = start + int(np.argmin(window))
        return cls(
            start_index=start,
            end_index=end,
            peak_pos_index=pos,
            peak_neg_index=neg,
            peak_pos_disp=float(history.displacement[pos]),
            peak_neg_disp=float(history.displacement[neg]),
            peak_pos_force=float(history.force[pos]),
            peak_neg_force=float(history.force[neg]),
            partial=partial,
        )

    @classmethod
    def spanning(cls, history: LoadDisplacementHistory) -> "Cycle":
        """The whole trace treated as one closed loop."""
        return cls.over(history, 0, len(history) - 1)

    @property
    def n_points(self) -> int:
        return self.end_index - self.start_index + 1


@dataclass(frozen=True)
class Segmentation:
    cycles: tuple[Cycle, ...]
    partials: tuple[Cycle, ...]
    threshold: float

    def __iter__(self):
        return iter(self.cycles)

    def __len__(self) -> int:
        return len(self.cycles)

    def __getitem__(self, item) -> Cycle:
        return self.cycles[item]

    @property
    def trailing(self) -> Cycle | None:
        tail = [p for p in self.partials if p.start_index >= self.cycles[-1].end_index]
        return tail[0] if tail else None


@dataclass(frozen=True)
class CycleSummary:
    energy: float
    mean_force: float
    mean_disp: float
    drift_sum: float
    partial: bool = False
    dissipative: bool = True

    def to_dict(self) -> dict:
        return {
            "energy_kNmm": self.energy,
            "mean_force_kN": self.mean_force,
            "mean_disp_mm": self.mean_disp,
            "drift_sum_pct": self.drift_sum,
            "partial": self.partial,
            "dissipative": self.dissipative,
        }


def _excursions(state: np.ndarray) -> list[list[int]]:
    """Runs of samples outside the noise band, as [sign, first, last].

    Runs of one sign separated only by in-band samples are merged.
    """
    runs: list[list[int]] = []
    for i in np.flatnonzero(state):
        sign = int(state[i])
        if runs and runs[-1][0] == sign:
            runs[-1][2] = int(i)
        else:
            runs.append([sign, int(i), int(i)])
    return runs


def segment_cycles(
    history: LoadDisplacementHistory, noise_fraction: float = DEFAULT_NOISE_FRACTION
) -> Segmentation:
    """Split a trace at upward zero crossings of displacement.

    A cycle is one positive and one negative excursion closed by the next
    upward crossing. Excursions smaller than `noise_fraction` of the peak
    |displacement| never start a cycle. Consecutive cycles share their
    boundary sample. Anything before the first or after the last boundary is
    returned in `partials`.
    """
    disp = history.displacement
    last_index = len(history) - 1
    amplitude = float(np.max(np.abs(disp)))
    threshold = noise_fraction * amplitude
    label = history.specimen_id or "<history>"

    state = np.where(disp > threshold, 1, np.where(disp < -threshold, -1, 0))
    runs = _excursions(state)
    if amplitude == 0 or not runs:
        raise NoCompleteCycleError(f"{label}: no complete cycle (no excursion above noise band)")

    # sample 0 opens a cycle only when the trace starts at rest; a trace that
    # starts mid-excursion waits for its first upward crossing
    starts_at_rest = abs(float(disp[0])) <= threshold
    boundaries: list[int] = [0] if runs[0][0] > 0 and starts_at_rest else []
    for k, (sign, _first, last) in enumerate(runs):
        if sign > 0:
            continue
        has_next = k + 1 < len(runs)
        stop = runs[k + 1][1] + 1 if has_next else len(disp)
        up = np.flatnonzero(disp[last + 1:stop] >= 0)
        if up.size:
            boundaries.append(last + 1 + int(up[0]))
        elif not has_next and state[-1] == 0:
            # settled back inside the band without touching zero
            boundaries.append(last_index)

    if len(boundaries) < 2:
        raise NoCompleteCycleError(
            f"{label}: no complete cycle (needs a positive and a negative excursion closed by an upward crossing)"
        )

    cycles = tuple(Cycle.over(history, a, b) for a, b in zip(boundaries, boundaries[1:]))
    partials = []
    if boundaries[0] > 0:
        partials.append(Cycle.over(history, 0, boundaries[0], partial=True))
    if boundaries[-1] < last_index:
        partials.append(Cycle.over(history, boundaries[-1], last_index, partial=True))
    for p in partials:
        logger.info(f"{label}: partial excursion at samples {p.start_index}-{p.end_index}")

    return Segmentation(cycles=cycles, partials=tuple(partials), threshold=threshold)


def loop_work(displacement: np.ndarray, force: np.ndarray, closed: bool = True) -> float:
    """Trapezoidal integral of F dδ along the path, closing it when asked.

    Positive for loops that run clockwise in the (δ, F) plane, i.e. the
    loading branch above the unloading branch.
    """
    d = np.asarray(displacement, dtype=float)
    f = np.asarray(force, dtype=float)
    if closed:
        d = np.append(d, d[0])
        f = np.append(f, f[0])
    return float(trapezoid(f, d))


def _window(history: LoadDisplacementHistory, cycle: Cycle) -> tuple[np.ndarray, np.ndarray]:
    if not 0 <= cycle.start_index < cycle.end_index < len(history):
        raise ValidationError(
            f"cycle [{cycle.start_index}, {cycle.end_index}] outside history of {len(history)} points"
        )
    sl = slice(cycle.start_index, cycle.end_index + 1)
    return history.displacement[sl], history.force[sl]


def cycle_energy(history: LoadDisplacementHistory, cycle: Cycle) -> float:
    """Area enclosed by the cycle's loop, kN*mm, independent of traversal direction."""
    if cycle.n_points < 3:
        raise ValidationError(f"cycle needs at least 3 points, got {cycle.n_points}")
    d, f = _window(history, cycle)
    return abs(loop_work(d, f, closed=True))


def summarize_cycle(history: LoadDisplacementHistory, cycle: Cycle) -> CycleSummary:
    d, f = _window(history, cycle)
    peak_pos = max(float(d.max()), 0.0)
    peak_neg = min(float(d.min()), 0.0)

    if cycle.partial:
        # open path: work done on the specimen, may be negative for pure unloading
        energy = loop_work(d, f, closed=False)
        dissipative = energy >= 0
    else:
        if cycle.n_points < 3:
            raise ValidationError(f"cycle needs at least 3 points, got {cycle.n_points}")
        work = loop_work(d, f, closed=True)
        dissipative = work >= 0
        if not dissipative:
            logger.warning(
                f"{history.specimen_id or '<history>'}: cycle at samples {cycle.start_index}-{cycle.end_index} "
                f"runs against the dissipative direction; check the trace or segmentation"
            )
        energy = abs(work)

    return CycleSummary(
        energy=energy,
        mean_force=(abs(float(f.max())) + abs(float(f.min()))) / 2,
        mean_disp=(abs(float(d.max())) + abs(float(d.min()))) / 2,
        drift_sum=(peak_pos - peak_neg) / history.wall_height * 100.0,
        partial=cycle.partial,
        dissipative=dissipative,
    )


def nde_hidalgo(summary: CycleSummary, cycle_energy: float) -> float:
    """Cycle energy over 4 * mean peak force * mean peak displacement."""
    if summary.mean_force <= 0 or summary.mean_disp <= 0:
        raise DegenerateCycleError(
            f"degenerate cycle: mean force {summary.mean_force} kN, mean displacement {summary.mean_disp} mm"
        )
    return cycle_energy / (4.0 * summary.mean_force * summary.mean_disp)


def nde_kuang(history: LoadDisplacementHistory, v_i: float, delta_y: float, mu: float) -> float:
    """Work along the trace up to top displacement mu * delta_y, over v_i * delta_y.

    The last segment is cut by linear interpolation at the target displacement.
    Ductilities below 1 are accepted to probe the elastic branch.
    """
    if v_i <= 0 or delta_y <= 0:
        raise ValidationError(f"v_i and delta_y must be > 0, got {v_i} kN and {delta_y} mm")
    if mu <= 0:
        raise ValidationError(f"ductility must be > 0, got {mu}")

    d, f = history.displacement, history.force
    target = mu * delta_y
    reached = np.flatnonzero(d >= target)
    if not reached.size:
        raise ValidationError(
            f"{history.specimen_id or '<history>'}: never reaches {target:g} mm "
            f"(max ductility attained {float(d.max()) / delta_y:.4g})"
        )

    k = int(reached[0])
    if k == 0:
        return 0.0
    t = (target - d[k - 1]) / (d[k] - d[k - 1])
    f_target = f[k - 1] + t * (f[k] - f[k - 1])
    work = trapezoid(np.append(f[:k], f_target), np.append(d[:k], target))
    return float(work) / (v_i * delta_y)


def ncde(summaries: Iterable[CycleSummary]) -> float:
    """Total energy over total drift (sum of ratios, never a mean of per-cycle ratios)."""
    summaries = list(summaries)
    if not summaries:
        raise ValidationError("NCDE needs at least one cycle summary")
    negative = [i for i, s in enumerate(summaries) if s.drift_sum < 0]
    if negative:
        raise ValidationError(f"negative drift sum in summary {negative[0]}")
    total_drift = sum(s.drift_sum for s in summaries)
    if total_drift <= 0:
        raise ValidationError("zero cumulative drift")
    return sum(s.energy for s in summaries) / total_drift


@dataclass(frozen=True)
class EnergyReport:
    specimen_id: str
    wall_height: float
    cycles: tuple[Cycle, ...]
    summaries: tuple[CycleSummary, ...]

    @property
    def total_energy(self) -> float:
        return sum(s.energy for s in self.summaries)

    @property
    def total_drift(self) -> float:
        return sum(s.drift_sum for s in self.summaries)

    @property
    def ncde(self) -> float:
        return ncde(self.summaries)

    @property
    def cycle_count(self) -> int:
        return sum(1 for s in self.summaries if not s.partial)

    @property
    def partial_count(self) -> int:
        return sum(1 for s in self.summaries if s.partial)

    def to_dict(self) -> dict:
        rows = []
        for cycle, summary in zip(self.cycles, self.summaries):
            row = {"start_index": cycle.start_index, "end_index": cycle.end_index, **summary.to_dict()}
            if not summary.partial:
                try:
                    row["nde"] = nde_hidalgo(summary, summary.energy)
                except DegenerateCycleError:
                    row["nde"] = None
            rows.append(row)
        return {
            "specimen_id": self.specimen_id,
            "wall_height_mm": self.wall_height,
            "cycle_count": self.cycle_count,
            "partial_count": self.partial_count,
            "total_energy_kNmm": self.total_energy,
            "total_drift_pct": self.total_drift,
            "ncde": self.ncde,
            "cycles": rows,
        }


def energy_report(
    history: LoadDisplacementHistory, noise_fraction: float = DEFAULT_NOISE_FRACTION
) -> EnergyReport:
    """Segment, summarize every cycle and partial excursion, in trace order."""
    segmentation = segment_cycles(history, noise_fraction)
    pieces: Sequence[Cycle] = sorted(
        segmentation.cycles + segmentation.partials, key=lambda c: c.start_index
    )
    return EnergyReport(
        specimen_id=history.specimen_id,
        wall_height=history.wall_height,
        cycles=tuple(pieces),
        summaries=tuple(summarize_cycle(history, c) for c in pieces),
    )


def compare_traces(a: LoadDisplacementHistory, b: LoadDisplacementHistory) -> float:
    """Relative NCDE discrepancy of trace `a` against reference trace `b`."""
    report = energy_report(b)
    reference = report.ncde
    # NCDE of a loop with no enclosed area, up to rounding of the path integral
    scale = float(np.max(np.abs(b.force)) * np.max(np.abs(b.displacement))) / report.total_drift
    if abs(reference) <= ZERO_NCDE_RTOL * scale:
        raise ValidationError(f"{b.specimen_id or '<history>'}: reference trace has zero NCDE")
    return abs(energy_report(a).ncde - reference) / reference
