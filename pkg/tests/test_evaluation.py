from datetime import datetime, timezone

import numpy as np
import pytest

from stlf_engine.engine.evaluation import (
    ForecastBundle,
    MetricReport,
    aggregate_reports,
    ensemble_combine,
    metrics,
    naive_forecast,
    pi_coverage,
    repair_crossing,
    synth_generate,
)
from stlf_engine.errors import BoundsError, DataError

START = datetime(2018, 1, 8, tzinfo=timezone.utc)


def bundle(point, lower=None, upper=None, **kwargs):
    point = np.asarray(point, dtype=float)
    return ForecastBundle(
        series_id=kwargs.pop("series_id", "S"),
        start=kwargs.pop("start", START),
        point=point,
        lower=np.asarray(lower if lower is not None else point - 10, dtype=float),
        upper=np.asarray(upper if upper is not None else point + 10, dtype=float),
        **kwargs,
    )


def test_metrics_symmetric_errors():
    report = metrics([100.0, 100.0], [110.0, 90.0])
    assert report.mape == pytest.approx(10.0)
    assert report.mpe == pytest.approx(0.0)
    assert report.rmse == pytest.approx(10.0)
    assert report.stdpe == pytest.approx(10.0)
    assert report.n == 2


def test_metrics_over_forecast_is_negative_mpe():
    z = np.array([900.0, 1000.0, 1100.0, 1250.0])
    report = metrics(z, 1.1 * z)
    assert report.mpe == pytest.approx(-10.0)
    assert report.mape == pytest.approx(10.0)
    assert report.stdpe == pytest.approx(0.0, abs=1e-12)
    assert report.iqrape == pytest.approx(0.0, abs=1e-12)


def test_metrics_perfect_forecast():
    z = np.linspace(500, 900, 24)
    report = metrics(z, z)
    assert report.model_dump() == {"mape": 0.0, "mdape": 0.0, "iqrape": 0.0, "rmse": 0.0, "mpe": 0.0,
                                   "stdpe": 0.0, "n": 24}


def test_percentage_metrics_are_scale_free():
    rng = np.random.default_rng(0)
    z = rng.uniform(800, 1200, size=48)
    zhat = z * rng.uniform(0.9, 1.1, size=48)
    a, b = metrics(z, zhat), metrics(1000 * z, 1000 * zhat)
    for field in ("mape", "mdape", "iqrape", "mpe", "stdpe"):
        assert getattr(b, field) == pytest.approx(getattr(a, field), rel=1e-9)
    assert b.rmse == pytest.approx(1000 * a.rmse, rel=1e-9)


def test_metrics_errors():
    with pytest.raises(DataError):
        metrics([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(DataError):
        metrics([1.0, 2.0], [1.0])


def test_aggregate_is_mean_of_series():
    a = MetricReport(mape=1.0, mdape=1.0, iqrape=0.5, rmse=10.0, mpe=-1.0, stdpe=2.0, n=24)
    b = MetricReport(mape=3.0, mdape=2.0, iqrape=1.5, rmse=30.0, mpe=1.0, stdpe=4.0, n=48)
    agg = aggregate_reports({"A": a, "B": b})
    assert (agg.mape, agg.rmse, agg.mpe, agg.n) == (2.0, 20.0, 0.0, 72)
    with pytest.raises(DataError):
        aggregate_reports({})


def test_pi_coverage():
    z = [1.0, 5.0, 10.0, 20.0]
    assert pi_coverage(z, [2.0, 2.0, 2.0, 2.0], [10.0, 10.0, 10.0, 10.0]) == (50.0, 25.0, 25.0)
    assert pi_coverage([3.0], [3.0], [3.0]) == (100.0, 0.0, 0.0)
    with pytest.raises(BoundsError):
        pi_coverage([1.0], [2.0], [1.0])


def test_naive_forecast():
    values = np.arange(1.0, 24 * 10 + 1)
    np.testing.assert_array_equal(naive_forecast(values, 7), values[:24])
    np.testing.assert_array_equal(naive_forecast(values, 9), values[48:72])
    with pytest.raises(DataError):
        naive_forecast(values, 6)
    with pytest.raises(DataError):
        naive_forecast(values, 18)


def test_repair_crossing_sorts_per_hour():
    fixed = repair_crossing(bundle([10.0, 10.0], lower=[12.0, 5.0], upper=[8.0, 15.0]))
    np.testing.assert_array_equal(fixed.lower, [8.0, 5.0])
    np.testing.assert_array_equal(fixed.point, [10.0, 10.0])
    np.testing.assert_array_equal(fixed.upper, [12.0, 15.0])


def test_bundle_rejects_unequal_horizons():
    with pytest.raises(BoundsError):
        ForecastBundle("S", START, np.ones(24), np.ones(23), np.ones(24))


def test_combine_single_member_is_identity():
    b = bundle(np.linspace(900, 1100, 24))
    assert ensemble_combine([b]) is b


def test_combine_mean_and_median():
    members = [bundle(np.full(24, v), alpha=a) for v, a in ((100.0, 0.1), (110.0, 0.2), (150.0, 0.6))]
    mean = ensemble_combine(members, "mean")
    median = ensemble_combine(members, "median")
    np.testing.assert_allclose(mean.point, np.full(24, 120.0))
    np.testing.assert_allclose(median.point, np.full(24, 110.0))
    np.testing.assert_allclose(mean.upper, np.full(24, 130.0))
    assert mean.alpha == pytest.approx(0.3)
    assert mean.members == 3


def test_combine_rejects_misaligned_members():
    with pytest.raises(DataError):
        ensemble_combine([bundle(np.ones(24)), bundle(np.ones(24), series_id="T")])
    with pytest.raises(DataError):
        ensemble_combine([])


def test_synth_is_deterministic_and_positive():
    a = synth_generate(seed=3, days=35)
    b = synth_generate(seed=3, days=35)
    assert a.series_id == "SYN3"
    assert len(a) == 35 * 24
    assert a.start.weekday() == 0 and a.start.hour == 0
    assert np.array_equal(a.values, b.values)
    assert np.all(a.values > 0)
    assert not np.array_equal(a.values, synth_generate(seed=4, days=35).values)
    with pytest.raises(DataError):
        synth_generate(seed=0, days=27)


def test_synth_has_weekly_shape():
    series = synth_generate(seed=1, days=28 * 4, noise=0.0)
    weeks = series.values[: 16 * 168].reshape(16, 168)
    profile = weeks.mean(axis=0)
    weekday_mean = profile[:120].mean()
    weekend_mean = profile[120:].mean()
    assert weekend_mean < weekday_mean
