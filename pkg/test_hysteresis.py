# test_hysteresis.py

import math

import numpy as np
import pytest

from core.errors import DegenerateCycleError, NoCompleteCycleError, ValidationError
from core.hysteresis import (
    Cycle,
    CycleSummary,
    LoadDisplacementHistory,
    compare_traces,
    cycle_energy,
    energy_report,
    loop_work,
    ncde,
    nde_hidalgo,
    nde_kuang,
    segment_cycles,
    summarize_cycle,
)
from tools.oracles import oracle_shoelace
from tools.synth_hysteresis import LOOP_SHAPES, gen_hysteresis


def rectangle(a: float, b: float) -> list[tuple[float, float]]:
    return [(0, b), (a, b), (a, -b), (-a, -b), (-a, b), (0, b)]


def sine_trace(samples: int, per_loop: int = 100, amplitude: float = 10.0, force: float = 50.0):
    t = 2 * np.pi * np.arange(samples) / per_loop
    d = amplitude * np.sin(t)
    d[np.abs(d) < 1e-9] = 0.0
    return d, force * np.cos(t)


def ellipse(a: float, b: float, samples: int) -> np.ndarray:
    t = 2 * np.pi * np.arange(samples) / samples
    pts = np.column_stack([a * np.sin(t), b * np.cos(t)])
    return np.vstack([pts, [[0.0, b]]])


# --- histories -----------------------------------------------------------

def test_history_needs_four_points():
    with pytest.raises(ValidationError, match="at least 4 points"):
        LoadDisplacementHistory([0, 1, 0], [0, 1, 0], 1000.0)


def test_history_rejects_non_finite_and_bad_height():
    with pytest.raises(ValidationError, match="index 2"):
        LoadDisplacementHistory([0, 1, np.nan, 0], [0, 1, 2, 0], 1000.0)
    with pytest.raises(ValidationError, match="wall height"):
        LoadDisplacementHistory([0, 1, 2, 0], [0, 1, 2, 0], 0.0)


def test_history_from_csv_names_bad_row(tmp_path):
    path = tmp_path / "W7.csv"
    path.write_text("displacement_mm,force_kN\n0,0\n1,abc\n2,3\n0,0\n")
    with pytest.raises(ValidationError, match="row 3"):
        LoadDisplacementHistory.from_csv(path, 1000.0)

    path.write_text("displacement_mm,force_kN\n0,50\n10,50\n10,-50\n-10,-50\n-10,50\n0,50\n")
    history = LoadDisplacementHistory.from_csv(path, 1000.0)
    assert history.specimen_id == "W7"
    assert len(history) == 6


# --- segmentation --------------------------------------------------------

def test_two_sine_loops_give_two_cycles():
    d, f = sine_trace(201)
    seg = segment_cycles(LoadDisplacementHistory(d, f, 2000.0))

    assert len(seg) == 2
    assert [(c.start_index, c.end_index) for c in seg] == [(0, 100), (100, 200)]
    assert [(c.peak_pos_index, c.peak_neg_index) for c in seg] == [(25, 75), (125, 175)]
    assert seg.partials == ()


def test_monotonic_ramp_has_no_complete_cycle():
    d = np.linspace(0, 10, 20)
    with pytest.raises(NoCompleteCycleError, match="no complete cycle"):
        segment_cycles(LoadDisplacementHistory(d, 5 * d, 2000.0))


def test_trailing_half_excursion_is_reported():
    d, f = sine_trace(151)
    history = LoadDisplacementHistory(d, f, 2000.0)
    seg = segment_cycles(history)

    assert len(seg) == 1
    assert (seg[0].start_index, seg[0].end_index) == (0, 100)
    assert seg.trailing is not None
    assert (seg.trailing.start_index, seg.trailing.end_index) == (100, 150)

    report = energy_report(history)
    assert report.cycle_count == 1
    assert report.partial_count == 1
    assert report.total_drift == pytest.approx(sum(s.drift_sum for s in report.summaries))


def test_leading_negative_excursion_is_a_partial():
    d, f = sine_trace(251)
    history = LoadDisplacementHistory(d[50:], f[50:], 2000.0)
    seg = segment_cycles(history)
    assert len(seg) == 1
    assert seg.partials[0].start_index == 0
    assert seg.partials[0].partial


def test_trace_starting_at_a_peak_opens_with_a_partial():
    d, f = sine_trace(301)
    history = LoadDisplacementHistory(d[25:], f[25:], 2000.0)
    seg = segment_cycles(history)

    assert [(c.start_index, c.end_index) for c in seg] == [(75, 175), (175, 275)]
    assert [(p.start_index, p.end_index) for p in seg.partials] == [(0, 75)]
    report = energy_report(history)
    assert (report.cycle_count, report.partial_count) == (2, 1)


def test_trace_starting_inside_the_noise_band_opens_a_cycle():
    d, f = sine_trace(201)
    d[0] = 0.05
    seg = segment_cycles(LoadDisplacementHistory(d, f, 2000.0))
    assert [(c.start_index, c.end_index) for c in seg] == [(0, 100), (100, 200)]


def test_cycles_share_boundary_and_cover_history():
    synth = gen_hysteresis("ellipse", cycles=4, seed=3)
    seg = segment_cycles(synth.history)
    assert len(seg) == 4
    assert seg[0].start_index == 0
    assert seg[-1].end_index == len(synth.history) - 1
    for left, right in zip(seg.cycles, seg.cycles[1:]):
        assert left.end_index == right.start_index


# --- energy ------------------------------------------------------------------

def test_rectangle_energy():
    history = LoadDisplacementHistory.from_points(rectangle(10, 50), 1000.0)
    assert cycle_energy(history, Cycle.spanning(history)) == pytest.approx(2000.0, rel=1e-12)


def test_elastic_loop_has_zero_energy():
    pts = [(0, 0), (10, 50), (0, 0), (-10, -50), (0, 0)]
    history = LoadDisplacementHistory.from_points(pts, 1000.0)
    assert cycle_energy(history, Cycle.spanning(history)) == pytest.approx(0.0, abs=1e-12)


def test_ellipse_energy_within_half_percent():
    history = LoadDisplacementHistory.from_points(ellipse(10, 80, 720), 1000.0)
    energy = cycle_energy(history, Cycle.spanning(history))
    assert energy == pytest.approx(math.pi * 800, rel=5e-3)


def test_cycle_energy_needs_three_points():
    history = LoadDisplacementHistory.from_points(rectangle(10, 50), 1000.0)
    with pytest.raises(ValidationError, match="at least 3 points"):
        cycle_energy(history, Cycle.over(history, 0, 1))


def test_reversed_traversal_keeps_energy():
    pts = rectangle(10, 50)
    forward = LoadDisplacementHistory.from_points(pts, 1000.0)
    backward = LoadDisplacementHistory.from_points(pts[::-1], 1000.0)

    assert loop_work(forward.displacement, forward.force) == pytest.approx(
        -loop_work(backward.displacement, backward.force)
    )
    assert cycle_energy(backward, Cycle.spanning(backward)) == pytest.approx(2000.0)


def test_polygon_energy_matches_shoelace():
    rng = np.random.default_rng(11)
    for _ in range(50):
        k = int(rng.integers(5, 13))
        angles = np.sort(rng.uniform(0, 2 * np.pi, k))
        radii = rng.uniform(0.5, 2.0, k)
        pts = np.column_stack([10 * radii * np.cos(angles), 50 * radii * np.sin(angles)])
        history = LoadDisplacementHistory.from_points(pts, 1000.0)
        assert cycle_energy(history, Cycle.spanning(history)) == pytest.approx(oracle_shoelace(pts), rel=1e-9)


def test_summary_of_rectangle_cycle():
    history = LoadDisplacementHistory.from_points(rectangle(10, 50), 1000.0)
    summary = summarize_cycle(history, Cycle.spanning(history))

    assert summary.energy == pytest.approx(2000.0)
    assert summary.mean_force == 50.0
    assert summary.mean_disp == 10.0
    assert summary.drift_sum == pytest.approx(2.0)
    assert summary.dissipative
    assert nde_hidalgo(summary, summary.energy) == pytest.approx(1.0)
    assert ncde([summary]) == pytest.approx(1000.0)


def test_counter_running_loop_is_flagged(caplog):
    history = LoadDisplacementHistory.from_points(rectangle(10, 50)[::-1], 1000.0)
    summary = summarize_cycle(history, Cycle.spanning(history))
    assert not summary.dissipative
    assert summary.energy == pytest.approx(2000.0)
    assert "dissipative direction" in caplog.text


# --- NDE / NCDE ----------------------------------------------------------

def test_nde_hidalgo():
    assert nde_hidalgo(CycleSummary(2000.0, 50.0, 10.0, 2.0), 2000.0) == pytest.approx(1.0)
    assert nde_hidalgo(CycleSummary(0.0, 50.0, 10.0, 2.0), 0.0) == 0.0
    with pytest.raises(DegenerateCycleError, match="degenerate cycle"):
        nde_hidalgo(CycleSummary(10.0, 0.0, 10.0, 2.0), 10.0)


def test_nde_kuang_on_ramps():
    d = np.linspace(0, 1, 11)
    ramp = LoadDisplacementHistory(d, 100 * d, 1000.0)
    assert nde_kuang(ramp, 100.0, 1.0, 1.0) == pytest.approx(0.5)
    assert nde_kuang(ramp, 100.0, 1.0, 0.5) == pytest.approx(0.125)

    d = np.linspace(0, 2, 21)
    plastic = LoadDisplacementHistory(d, 100 * np.minimum(d, 1.0), 1000.0)
    assert nde_kuang(plastic, 100.0, 1.0, 2.0) == pytest.approx(1.5)


def test_nde_kuang_reports_attained_ductility():
    d = np.linspace(0, 1, 11)
    ramp = LoadDisplacementHistory(d, 100 * d, 1000.0)
    with pytest.raises(ValidationError, match="max ductility attained 1"):
        nde_kuang(ramp, 100.0, 1.0, 3.0)


def test_ncde_sums_before_dividing():
    one = CycleSummary(2000.0, 50.0, 10.0, 2.0)
    assert ncde([one]) == pytest.approx(1000.0)
    assert ncde([one, one]) == pytest.approx(1000.0)

    summaries = [CycleSummary(e, 1.0, 1.0, s) for e, s in ((100, 0.5), (300, 1.0), (600, 2.5))]
    assert ncde(summaries) == pytest.approx(250.0)

    with pytest.raises(ValidationError, match="zero cumulative drift"):
        ncde([CycleSummary(10.0, 1.0, 1.0, 0.0)])


def test_ncde_of_concatenated_histories():
    first = rectangle(10, 50)
    second = rectangle(20, 80)
    history = LoadDisplacementHistory.from_points(first + second, 2000.0)
    report = energy_report(history)

    # parts: 2000 kN*mm over 1 %, 6400 kN*mm over 2 %
    assert report.cycle_count == 2
    assert report.ncde == pytest.approx(8400.0 / 3.0)
    assert report.ncde != pytest.approx((2000.0 / 1.0 + 6400.0 / 2.0) / 2)


@pytest.mark.parametrize("seed", range(20))
def test_ncde_scaling_invariants(seed):
    synth = gen_hysteresis(LOOP_SHAPES[seed % len(LOOP_SHAPES)], cycles=3, seed=seed)
    base = energy_report(synth.history).ncde
    c = 0.5 + seed / 10

    assert energy_report(synth.history.scaled(force=c)).ncde == pytest.approx(c * base, rel=1e-9)
    # energy grows with c while the drift ratios stay put
    stretched = energy_report(synth.history.scaled(displacement=c))
    assert stretched.total_drift == pytest.approx(energy_report(synth.history).total_drift, rel=1e-9)
    assert stretched.ncde == pytest.approx(c * base, rel=1e-9)


def test_energy_report_document():
    synth = gen_hysteresis("rectangle", cycles=2, seed=0, jitter=0.0, growth=0.0)
    doc = energy_report(synth.history).to_dict()
    assert doc["cycle_count"] == 2
    assert doc["partial_count"] == 0
    assert [c["nde"] for c in doc["cycles"]] == pytest.approx([1.0, 1.0])


# --- trace comparison ----------------------------------------------------

def test_compare_identical_traces():
    synth = gen_hysteresis("pinched", cycles=2, seed=1)
    assert compare_traces(synth.history, synth.history) == 0.0


def test_compare_force_scaled_trace():
    synth = gen_hysteresis("bilinear", cycles=2, seed=2)
    assert compare_traces(synth.history.scaled(force=1.05), synth.history) == pytest.approx(0.05, rel=1e-9)


def test_compare_half_density_ellipse():
    full = ellipse(10, 80, 720)
    half = np.vstack([full[:-1:2], full[-1:]])
    a = LoadDisplacementHistory.from_points(half, 1000.0)
    b = LoadDisplacementHistory.from_points(full, 1000.0)
    assert compare_traces(a, b) < 0.01


def test_compare_against_elastic_reference_is_rejected():
    d, _ = sine_trace(201)
    elastic = LoadDisplacementHistory(d, 5.0 * d, 2000.0, "E1")
    with pytest.raises(ValidationError, match="E1: reference trace has zero NCDE"):
        compare_traces(gen_hysteresis("ellipse", cycles=2, seed=0).history, elastic)
    with pytest.raises(ValidationError, match="has zero NCDE"):
        compare_traces(elastic, elastic)
