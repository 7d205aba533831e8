"""Campaign plumbing: error pooling, cost model, synthetic curves."""

import numpy as np
import pytest

from peqfdn import (
    CampaignError,
    ErrorDistribution,
    FitConfig,
    InvalidParameterError,
    T60Curve,
    achieved_t60,
    magnitude_metrics,
    op_count,
    run_campaign,
    synthetic_smooth_curves,
    t60_relative_error,
)
from peqfdn.targets import FrequencyGrid

# Small grid and iteration counts keep campaign tests quick; quality
# thresholds here are loose because convergence is covered elsewhere.
QUICK_GRID = FrequencyGrid.log_spaced(48000.0, size=96)


def quick_cfg(n_bands=4, iterations=400, seed=0):
    return FitConfig(
        n_bands=n_bands,
        iterations=iterations,
        learning_rate=0.1,
        seed=seed,
        grid=QUICK_GRID,
    )


def test_op_count_values():
    assert op_count(4) == op_count(4)
    report = op_count(12)
    assert (report.ops_per_sample, report.parameters) == (108, 36)
    with pytest.raises(InvalidParameterError):
        op_count(0)
    with pytest.raises(InvalidParameterError):
        op_count(2.5)


def test_t60_relative_error_sign_and_value():
    # Achieving 1.9 s against a 2.0 s target is a +5% error.
    err = t60_relative_error(np.array([2.0]), np.array([1.9]))
    assert err[0] == pytest.approx(5.0)
    err = t60_relative_error(np.array([1.0]), np.array([1.25]))
    assert err[0] == pytest.approx(-25.0)
    with pytest.raises(InvalidParameterError):
        t60_relative_error(np.array([1.0, 2.0]), np.array([1.0]))
    with pytest.raises(InvalidParameterError):
        t60_relative_error(np.array([0.0]), np.array([1.0]))


def test_magnitude_metrics_identical_and_offset():
    target = np.array([-6.0, -3.0, -1.5])
    assert magnitude_metrics(target, target) == (0.0, 0.0)
    mse, mae = magnitude_metrics(target, target + np.array([0.1, -0.2, 0.0]))
    assert mse == pytest.approx((0.01 + 0.04) / 3.0)
    assert mae == pytest.approx(0.2)


def test_error_distribution_binning():
    errors = np.array([-2.4, -0.3, 0.2, 0.9, 3.1])
    dist = ErrorDistribution.from_errors(errors, bin_width_pct=1.0)
    assert dist.bin_edges_pct[0] == -3.0
    assert dist.bin_edges_pct[-1] == 4.0
    assert dist.n_points == errors.size
    assert dist.counts.sum() == errors.size
    assert dist.max_abs_pct == pytest.approx(3.1)
    assert dist.median_pct == pytest.approx(0.2)
    csv = dist.to_csv()
    assert csv.splitlines()[0] == "bin_lo_pct,bin_hi_pct,count"
    assert len(csv.strip().splitlines()) == 1 + dist.counts.size


def test_error_distribution_validation():
    with pytest.raises(InvalidParameterError):
        ErrorDistribution.from_errors(np.array([]))
    with pytest.raises(InvalidParameterError):
        ErrorDistribution.from_errors(np.array([np.nan]))
    with pytest.raises(InvalidParameterError):
        ErrorDistribution.from_errors(np.array([1.0]), bin_width_pct=0.0)


def test_synthetic_curves_are_deterministic_and_bounded():
    a = synthetic_smooth_curves(5, seed=42)
    b = synthetic_smooth_curves(5, seed=42)
    assert len(a) == 5
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.t60_s, cb.t60_s)
        assert np.array_equal(ca.freq_hz, cb.freq_hz)
    for curve in a:
        assert curve.freq_hz.size == 31
        assert np.all((curve.t60_s >= 0.3) & (curve.t60_s <= 5.0))
    assert a[0].name == "synthetic-0000"
    different = synthetic_smooth_curves(5, seed=43)
    assert not np.array_equal(a[0].t60_s, different[0].t60_s)


def test_achieved_t60_follows_flat_fit(flat_curve):
    from peqfdn import fit

    cfg = quick_cfg(iterations=800)
    fitted, _ = fit(flat_curve, 4800.0, 48000.0, cfg)
    t60 = achieved_t60(fitted.params, 4800.0, 48000.0, QUICK_GRID.freqs)
    assert np.all(np.abs(t60 - 1.0) < 0.05)


def test_run_campaign_pools_all_grid_points():
    curves = synthetic_smooth_curves(3, seed=7)
    result = run_campaign(curves, quick_cfg(), fs=48000.0)
    assert result.n_points == 3 * QUICK_GRID.size
    assert len(result.curve_reports) == 3
    assert not result.failures
    names = [r.name for r in result.curve_reports]
    assert names == sorted(names)


def test_run_campaign_is_deterministic():
    curves = synthetic_smooth_curves(3, seed=7)
    a = run_campaign(curves, quick_cfg(), fs=48000.0)
    b = run_campaign(curves, quick_cfg(), fs=48000.0)
    assert np.array_equal(a.distribution.counts, b.distribution.counts)
    assert np.array_equal(a.distribution.bin_edges_pct, b.distribution.bin_edges_pct)
    assert a.to_summary_dict() == b.to_summary_dict()


def test_run_campaign_workers_do_not_change_results():
    curves = synthetic_smooth_curves(4, seed=11)
    serial = run_campaign(curves, quick_cfg(), fs=48000.0, workers=1)
    parallel = run_campaign(curves, quick_cfg(), fs=48000.0, workers=2)
    assert serial.to_summary_dict() == parallel.to_summary_dict()


def test_run_campaign_flags_poorly_tracked_curves():
    # One iteration cannot follow a strongly varying curve, so envelope
    # violations must surface as flagged reports, not silent passes.
    curves = synthetic_smooth_curves(3, seed=3)
    result = run_campaign(curves, quick_cfg(iterations=1), fs=48000.0)
    assert result.flagged
    for report in result.flagged:
        assert not report.within_envelope
        assert report.max_abs_error_pct > 25.0
    assert set(result.to_summary_dict()["flagged_curves"]) == {
        r.name for r in result.flagged
    }


def test_run_campaign_aborts_when_fits_diverge():
    curves = synthetic_smooth_curves(3, seed=5)
    bad_cfg = FitConfig(
        n_bands=4, iterations=30, learning_rate=1e8, seed=0, grid=QUICK_GRID
    )
    with pytest.raises(CampaignError):
        run_campaign(curves, bad_cfg, fs=48000.0)


def test_run_campaign_validation():
    with pytest.raises(InvalidParameterError):
        run_campaign([], quick_cfg())
    curves = synthetic_smooth_curves(1, seed=0)
    with pytest.raises(InvalidParameterError):
        run_campaign(curves, quick_cfg(), delay_range_s=(0.3, 0.01))
    with pytest.raises(InvalidParameterError):
        run_campaign(curves, quick_cfg(), workers=0)


def test_campaign_delay_draw_respects_range():
    curves = synthetic_smooth_curves(6, seed=9)
    result = run_campaign(
        curves, quick_cfg(iterations=50), delay_range_s=(0.05, 0.06), fs=48000.0
    )
    for report in result.curve_reports:
        assert 0.05 * 48000.0 * 0.99 <= report.delay_samples <= 0.06 * 48000.0 * 1.01
