# test_transform.py

import numpy as np
import pytest
from scipy import special

from core.errors import ValidationError
from core.transform import (
    BoxCoxParams,
    BoxCoxTransform,
    LogTransform,
    boxcox_apply,
    boxcox_invert,
    boxcox_optimize,
    filliben_medians,
    log_apply,
    log_invert,
    make_transform,
    probability_plot,
    transform_from_dict,
)


def test_boxcox_examples():
    assert boxcox_apply([1.0, np.e], 0.0) == pytest.approx([0.0, 1.0])
    assert boxcox_apply([3.0], 1.0) == pytest.approx([2.0])
    assert boxcox_apply([3.0], 2.0) == pytest.approx([4.0])
    assert boxcox_apply([4.0], -1.0) == pytest.approx([0.75])


def test_boxcox_is_continuous_at_zero():
    y = np.array([0.5, 2.0, 40.0])
    for lam in (1e-6, -1e-6):
        assert boxcox_apply(y, lam) == pytest.approx(np.log(y), abs=1e-4)


@pytest.mark.parametrize("lam", [-2.0, -0.5, 0.0, 0.1446, 1.0, 2.0])
def test_boxcox_round_trip_and_monotone(lam):
    y = np.geomspace(0.05, 500.0, 60)
    z = boxcox_apply(y, lam)
    assert np.all(np.diff(z) > 0)
    assert boxcox_invert(z, lam) == pytest.approx(y, rel=1e-9)


def test_boxcox_rejects_non_positive_values():
    with pytest.raises(ValidationError, match="index 1 must be > 0"):
        boxcox_apply([1.0, 0.0, 2.0], 0.5)
    with pytest.raises(ValidationError, match="index 0"):
        log_apply([-3.0])


def test_boxcox_inverse_outside_domain():
    # 1 + λz <= 0 has no preimage
    with pytest.raises(ValidationError, match="invertible range"):
        boxcox_invert([-3.0], 0.5)


def test_lambda_bounds():
    with pytest.raises(ValidationError, match=r"\[-5, 5\]"):
        BoxCoxParams(6.0)


def test_boxcox_fit_needs_ten_values():
    with pytest.raises(ValidationError, match="at least 10"):
        boxcox_optimize(np.arange(1.0, 10.0))
    with pytest.raises(ValidationError, match="non-constant"):
        boxcox_optimize(np.full(12, 3.0))


def test_normal_sample_keeps_lambda_near_one():
    y = 4.0 + np.random.default_rng(5).standard_normal(2000)
    params = boxcox_optimize(y[y > 0])
    assert params.lam == pytest.approx(1.0, abs=0.3)


@pytest.mark.slow
def test_lognormal_sample_recovers_log():
    close = 0
    for seed in range(20):
        y = np.exp(np.random.default_rng(seed).standard_normal(1000))
        close += abs(boxcox_optimize(y).lam) <= 0.15
    assert close >= 19


# --- Filliben medians and probability plots -----------------------------------

def test_filliben_small_samples():
    assert filliben_medians(3) == pytest.approx([0.2062995, 0.5, 0.7937005], abs=1e-6)
    assert filliben_medians(2) == pytest.approx([1 - 0.5**0.5, 0.5**0.5])
    with pytest.raises(ValidationError):
        filliben_medians(1)


@pytest.mark.parametrize("m", [2, 3, 10, 312])
def test_filliben_medians_are_symmetric(m):
    u = filliben_medians(m)
    assert u + u[::-1] == pytest.approx(np.ones(m), abs=1e-12)
    assert np.all(np.diff(u) > 0)


def test_probability_plot_quantiles_match_erf():
    plot = probability_plot([5.0, 1.0, 3.0, 2.0, 4.0])
    u = filliben_medians(5)
    assert plot.sorted_values == pytest.approx([1, 2, 3, 4, 5])
    assert plot.theoretical_quantiles == pytest.approx(np.sqrt(2) * special.erfinv(2 * u - 1), abs=1e-12)
    assert list(plot.to_frame().columns) == ["theoretical_quantile", "sample_value"]


def test_probability_plot_of_constant_sample():
    assert np.isnan(probability_plot(np.full(8, 2.5)).correlation)


def test_normal_sample_plots_straight():
    y = np.random.default_rng(2).normal(10.0, 2.0, 500)
    assert probability_plot(y).correlation > 0.99


# --- transform objects ---------------------------------------------------------

def test_log_transform_round_trip():
    t = make_transform("log")
    assert isinstance(t, LogTransform)
    y = np.array([10.0, 250.0, 4000.0])
    assert t.inverse(t.forward(y)) == pytest.approx(y)
    assert log_invert(log_apply(y)) == pytest.approx(y)


def test_identity_transform():
    t = make_transform("none")
    assert t.fit([1.0, 2.0]) is t
    assert t.forward([-1.0, 2.0]) == pytest.approx([-1.0, 2.0])


def test_boxcox_transform_lifecycle():
    t = make_transform("boxcox")
    assert t.tag == "boxcox"
    with pytest.raises(ValidationError, match="before fitting"):
        t.forward([1.0])

    y = np.exp(np.random.default_rng(3).normal(6.0, 0.8, 200))
    t.fit(y)
    assert t.tag.startswith("boxcox(")
    restored = transform_from_dict(t.to_dict())
    assert isinstance(restored, BoxCoxTransform)
    assert restored.params.lam == t.params.lam
    assert restored.inverse(t.forward(y)) == pytest.approx(y, rel=1e-9)


def test_unknown_transform():
    with pytest.raises(ValidationError, match="unknown transform 'sqrt'"):
        make_transform("sqrt")
